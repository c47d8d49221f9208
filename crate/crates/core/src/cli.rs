// Copyright 2026 The clockdm Authors
// SPDX-License-Identifier: Apache-2.0

//! Command line interface.
//!
//! Exit codes: 0 on success, 1 for usage and configuration errors, 2 when a
//! run completed only partially or a self-test did not pass.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::analysis::ramsey_analytic_sensitivity;
use crate::campaign::{
    read_results, run_campaign, to_exclusion, write_bounds_csv, write_exclusion_csv, CampaignConfig,
    ExclusionParams, FrequencyGrid, RunOptions,
};
use crate::dm::{self, DmParameters, POINTS_ON_LINE};
use crate::error::{Error, Result};
use crate::noise::validate_flicker;
use crate::sequence::Scheme;
use crate::units;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_PARTIAL: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "clockdm", version, about = "Clock-based dark matter search simulations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a campaign over a grid of Compton frequencies.
    Run(RunArgs),
    /// Allan deviation and PSD self-test of the flicker noise generator.
    ValidateNoise(NoiseArgs),
    /// Periodogram and mean-square self-test of the dark matter field.
    ValidateDm(DmArgs),
    /// Convert result files to CSV.
    Export(ExportArgs),
    /// Analytic Ramsey bound over a frequency range.
    Analytic(AnalyticArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// TOML configuration file; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub scheme: Option<Scheme>,
    #[arg(long)]
    pub fdm_min: Option<f64>,
    #[arg(long)]
    pub fdm_max: Option<f64>,
    #[arg(long)]
    pub fdm_points: Option<usize>,
    #[arg(long)]
    pub tm: Option<f64>,
    #[arg(long)]
    pub tp: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub sigma_ln: Option<f64>,
    #[arg(long)]
    pub measurements: Option<usize>,
    #[arg(long)]
    pub analysis_points: Option<usize>,
    /// JSON-lines output file.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads (default: CLOCKDM_THREADS, else all cores).
    #[arg(long)]
    pub threads: Option<usize>,
    /// Skip grid points already recorded in the output manifest.
    #[arg(long)]
    pub resume: bool,
}

#[derive(Debug, Args)]
pub struct NoiseArgs {
    #[arg(long, default_value_t = 1e-16)]
    pub sigma_ln: f64,
    #[arg(long, default_value_t = 0.01)]
    pub dt: f64,
    #[arg(long, default_value_t = 200_000)]
    pub steps: usize,
    #[arg(long, default_value_t = 20)]
    pub realizations: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct DmArgs {
    #[arg(long, default_value_t = 1.0)]
    pub fdm: f64,
    /// Field amplitude, fractional.
    #[arg(long, default_value_t = 1e-18)]
    pub phi0: f64,
    #[arg(long, default_value_t = 500)]
    pub realizations: usize,
    #[arg(long, default_value_t = POINTS_ON_LINE)]
    pub points_on_line: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also write one realization's per-probe amplitude and phase as CSV.
    #[arg(long)]
    pub dump: Option<PathBuf>,
    /// Measurement and probe durations for the dump.
    #[arg(long, default_value_t = 1e4)]
    pub tm: f64,
    #[arg(long, default_value_t = 1.0)]
    pub tp: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ExportFormat {
    Csv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ExportKind {
    /// `f_dm,bound_95`.
    Sensitivity,
    /// `m_phi_ev,d_e,fractional_bound,scheme`.
    Exclusion,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    /// JSON-lines result file.
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value_t = ExportFormat::Csv)]
    pub format: ExportFormat,
    #[arg(long, value_enum, default_value_t = ExportKind::Sensitivity)]
    pub kind: ExportKind,
    /// Output file (default: stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Campaign configuration whose `[exclusion]` table supplies defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Sensitivity coefficient (default 1e4).
    #[arg(long)]
    pub delta_k: Option<f64>,
    /// Local dark matter density, GeV/cm³ (default 0.4).
    #[arg(long)]
    pub rho_dm: Option<f64>,
    #[arg(long)]
    pub overdensity: Option<f64>,
}

#[derive(Debug, Args)]
pub struct AnalyticArgs {
    #[arg(long, default_value_t = 100.0)]
    pub tp: f64,
    #[arg(long, default_value_t = 1e6)]
    pub tm: f64,
    #[arg(long, default_value_t = 1e-5)]
    pub fdm_min: f64,
    #[arg(long, default_value_t = 1e-2)]
    pub fdm_max: f64,
    #[arg(long, default_value_t = 20)]
    pub fdm_points: usize,
}

/// Parses `args` (including the program name) and runs the command.
pub fn main_with_args<I, T>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command, out) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Io { .. } => EXIT_PARTIAL,
                _ => EXIT_CONFIG,
            }
        }
    }
}

fn execute(command: Command, out: &mut dyn Write) -> Result<i32> {
    match command {
        Command::Run(args) => run(args, out),
        Command::ValidateNoise(args) => validate_noise(args, out),
        Command::ValidateDm(args) => validate_dm(args, out),
        Command::Export(args) => export(args, out),
        Command::Analytic(args) => analytic(args, out),
    }
}

fn stdout_err(e: io::Error) -> Error {
    Error::io("<stdout>", e)
}

/// Merges the configuration file with command line overrides.
pub fn build_config(args: &RunArgs) -> Result<CampaignConfig> {
    let mut config = match (&args.config, args.scheme) {
        (Some(path), _) => CampaignConfig::load(path)?,
        (None, Some(scheme)) => CampaignConfig::new(scheme),
        (None, None) => return Err(Error::Config("either --config or --scheme is required".into())),
    };
    if let Some(s) = args.scheme {
        config.scheme = s;
    }
    if args.fdm_min.is_some() || args.fdm_max.is_some() || args.fdm_points.is_some() {
        let (f_min, f_max, points) = match config.grid {
            FrequencyGrid::LogSpaced { f_min, f_max, points } => (f_min, f_max, points),
            FrequencyGrid::Values { ref values } => (
                values.iter().copied().fold(f64::INFINITY, f64::min),
                values.iter().copied().fold(0.0, f64::max),
                values.len(),
            ),
        };
        config.grid = FrequencyGrid::LogSpaced {
            f_min: args.fdm_min.unwrap_or(f_min),
            f_max: args.fdm_max.unwrap_or(f_max),
            points: args.fdm_points.unwrap_or(points),
        };
    }
    if let Some(v) = args.tm {
        config.t_m = v;
    }
    if let Some(v) = args.tp {
        config.t_p = Some(v);
    }
    if let Some(v) = args.seed {
        config.seed = v;
    }
    if let Some(v) = args.sigma_ln {
        config.sigma_ln = Some(v);
    }
    if let Some(v) = args.measurements {
        config.n_measurements = Some(v);
    }
    if let Some(v) = args.analysis_points {
        config.analysis_points = v;
    }
    if let Some(v) = &args.out {
        config.output = Some(v.clone());
    }
    Ok(config)
}

fn run(args: RunArgs, out: &mut dyn Write) -> Result<i32> {
    let config = build_config(&args)?;
    let options = RunOptions {
        threads: args.threads,
        resume: args.resume,
    };
    let report = run_campaign(&config, &options)?;
    writeln!(out, "{:>12} {:>8} {:>14} {:>14}", "f_dm", "scheme", "bound_95", "analytic").map_err(stdout_err)?;
    for r in &report.results {
        writeln!(
            out,
            "{:>12.4e} {:>8} {:>14.4e} {:>14.4e}",
            r.f_dm, r.scheme, r.bound_95, r.analytic_ramsey
        )
        .map_err(stdout_err)?;
    }
    for (index, e) in &report.failures {
        writeln!(out, "grid point {index} failed: {e}").map_err(stdout_err)?;
    }
    Ok(if report.failures.is_empty() { EXIT_OK } else { EXIT_PARTIAL })
}

/// Allan deviation tolerance of the noise self-test.
pub const ADEV_TOLERANCE: f64 = 0.2;
/// PSD slope tolerance of the noise self-test.
pub const SLOPE_TOLERANCE: f64 = 0.15;

fn validate_noise(args: NoiseArgs, out: &mut dyn Write) -> Result<i32> {
    let v = validate_flicker(args.sigma_ln, args.dt, args.steps, args.realizations, &[1.0, 10.0, 100.0], args.seed)?;
    let w = |e: io::Error| stdout_err(e);
    writeln!(out, "{:>8} {:>14} {:>10}", "tau_s", "adev", "ratio").map_err(w)?;
    for (tau, a) in &v.adev {
        writeln!(out, "{tau:>8} {a:>14.4e} {:>10.3}", a / v.sigma_ln).map_err(w)?;
    }
    writeln!(
        out,
        "psd slope {:.3} over {:.3e}-{:.3e} Hz",
        v.psd_slope, v.slope_band.0, v.slope_band.1
    )
    .map_err(w)?;
    let passed = v.passed(ADEV_TOLERANCE, SLOPE_TOLERANCE);
    writeln!(out, "{}", if passed { "PASS" } else { "FAIL" }).map_err(w)?;
    Ok(if passed { EXIT_OK } else { EXIT_PARTIAL })
}

/// Periodogram tolerance of the field self-test.
pub const PERIODOGRAM_TOLERANCE: f64 = 0.1;
/// Mean-square tolerance of the field self-test.
pub const MEAN_SQUARE_TOLERANCE: f64 = 0.05;

fn validate_dm(args: DmArgs, out: &mut dyn Write) -> Result<i32> {
    let params = DmParameters::new(args.fdm, args.phi0)?;
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let v = dm::validate_field(&params, args.points_on_line, args.realizations, 3, &mut rng)?;
    let w = |e: io::Error| stdout_err(e);
    writeln!(out, "N_f = {}, {} realizations", v.n_f, v.realizations).map_err(w)?;
    writeln!(out, "{:>14} {:>14} {:>14} {:>8}", "offset_hz", "target", "periodogram", "ratio").map_err(w)?;
    for (offset, target, got) in &v.top_bins {
        writeln!(out, "{offset:>14.4e} {target:>14.4e} {got:>14.4e} {:>8.3}", got / target).map_err(w)?;
    }
    writeln!(
        out,
        "mean square {:.4e} (expected {:.4e})",
        v.mean_square,
        0.5 * args.phi0 * args.phi0
    )
    .map_err(w)?;
    if let Some(path) = &args.dump {
        let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
        let r = dm::synthesize_realization(&params, args.tm, args.tp, args.points_on_line, &mut rng)?;
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        r.write_csv(BufWriter::new(file), args.seed)
            .map_err(|e| Error::io(path, e))?;
    }
    let passed = v.worst_bin_error() < PERIODOGRAM_TOLERANCE && v.mean_square_error() < MEAN_SQUARE_TOLERANCE;
    writeln!(out, "{}", if passed { "PASS" } else { "FAIL" }).map_err(w)?;
    Ok(if passed { EXIT_OK } else { EXIT_PARTIAL })
}

fn export(args: ExportArgs, out: &mut dyn Write) -> Result<i32> {
    let ExportFormat::Csv = args.format;
    let results = read_results(&args.input)?;
    let mut sink: Box<dyn Write + '_> = match &args.out {
        Some(path) => Box::new(BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?)),
        None => Box::new(&mut *out),
    };
    let target = args.out.clone().unwrap_or_else(|| PathBuf::from("<stdout>"));
    let written = match args.kind {
        ExportKind::Sensitivity => write_bounds_csv(&results, &mut sink),
        ExportKind::Exclusion => {
            let base = match &args.config {
                Some(path) => CampaignConfig::load(path)?.exclusion,
                None => ExclusionParams::default(),
            };
            let params = ExclusionParams {
                delta_k: args.delta_k.unwrap_or(base.delta_k),
                rho_dm: args.rho_dm.unwrap_or(base.rho_dm),
                overdensity: args.overdensity.unwrap_or(base.overdensity),
            };
            if !(params.delta_k > 0.0 && params.rho_dm > 0.0 && params.overdensity > 0.0) {
                return Err(Error::param("exclusion", "delta_k, rho_dm and overdensity must be positive"));
            }
            let points: Vec<_> = results.iter().map(|r| to_exclusion(r, &params)).collect();
            write_exclusion_csv(&points, &mut sink)
        }
    };
    written
        .and_then(|_| sink.flush())
        .map_err(|e| Error::io(target, e))?;
    Ok(EXIT_OK)
}

fn analytic(args: AnalyticArgs, out: &mut dyn Write) -> Result<i32> {
    let grid = FrequencyGrid::LogSpaced {
        f_min: args.fdm_min,
        f_max: args.fdm_max,
        points: args.fdm_points,
    };
    let nu0 = units::thorium_clock_frequency();
    let w = |e: io::Error| stdout_err(e);
    writeln!(out, "f_dm,bound,in_band").map_err(w)?;
    for f in grid.frequencies()? {
        let b = ramsey_analytic_sensitivity(f, args.tp, args.tm, nu0);
        writeln!(out, "{:e},{:e},{}", b.f, b.bound, b.in_band).map_err(w)?;
    }
    Ok(EXIT_OK)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_cli(args: &[&str]) -> (i32, String) {
        let mut out = Vec::new();
        let code = main_with_args(std::iter::once("clockdm").chain(args.iter().copied()), &mut out);
        (code, String::from_utf8(out).unwrap())
    }

    #[test]
    fn invalid_flags_exit_with_config_error() {
        assert_eq!(run_cli(&["run", "--bogus"]).0, EXIT_CONFIG);
        assert_eq!(run_cli(&["frobnicate"]).0, EXIT_CONFIG);
        assert_eq!(run_cli(&["run"]).0, EXIT_CONFIG);
        assert_eq!(run_cli(&["run", "--scheme", "bbdd", "--tp", "-1"]).0, EXIT_CONFIG);
    }

    #[test]
    fn analytic_table() {
        let (code, text) = run_cli(&["analytic", "--tp", "100", "--tm", "1e6", "--fdm-points", "3"]);
        assert_eq!(code, EXIT_OK);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 4);
        let bound: f64 = lines[1].split(',').nth(1).unwrap().parse().unwrap();
        let expected = 3.95 / (2.0 * std::f64::consts::PI * units::thorium_clock_frequency() * 1e4);
        assert!((bound / expected - 1.0).abs() < 1e-12);
    }

    #[test]
    fn overrides_apply() {
        let args = Cli::try_parse_from([
            "clockdm", "run", "--scheme", "nbdd", "--fdm-min", "0.1", "--fdm-max", "10", "--fdm-points", "3",
            "--tm", "500", "--seed", "9", "--sigma-ln", "2e-17", "--measurements", "7",
        ])
        .unwrap();
        let Command::Run(run) = args.command else { panic!() };
        let c = build_config(&run).unwrap();
        assert_eq!(c.scheme, Scheme::Nbdd);
        assert_eq!(c.grid, FrequencyGrid::LogSpaced { f_min: 0.1, f_max: 10.0, points: 3 });
        assert_eq!((c.t_m, c.seed, c.sigma_ln, c.n_measurements), (500.0, 9, Some(2e-17), Some(7)));
    }
}
