// Copyright 2026 The clockdm Authors
// SPDX-License-Identifier: Apache-2.0

//! Search campaigns over a grid of Compton frequencies.
//!
//! For every grid point a campaign simulates `n_measurements` independent
//! measurements of duration `T_m`, each made of `T_m / T_p` probes. A
//! measurement yields three kinds of coherent spectra from the same pulse
//! sequences: noise only, signal only per unit fractional amplitude, and
//! noise plus each configured injection. The 95th percentile of the fitted
//! noise-only amplitude divided by the mean fitted amplitude per unit signal is
//! the detectable fractional amplitude.
//!
//! Every measurement draws from its own ChaCha stream keyed by grid index and
//! measurement index, so results do not depend on the number of threads.

use std::f64::consts::PI;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{
    self, expected_lineshape_with, fit_amplitude, fractional_uncertainty, quantile, ramsey_analytic_sensitivity,
    AnalysisGrid, CoherentAccumulator, FitResult, LineshapeModel, ANALYSIS_POINTS, MIN_REALIZATIONS,
};
use crate::dm::{self, probe_signal_phase, DmParameters, DmRealization, POINTS_ON_LINE};
use crate::error::{Error, Result};
use crate::noise::{qpn_phase, LaserNoise, NoiseStream};
use crate::sequence::{Scheme, SequencePlan};
use crate::units;

/// Version of the JSON result schema.
pub const SCHEMA_VERSION: u32 = 1;
/// Environment variable overriding the worker thread count.
pub const THREADS_ENV: &str = "CLOCKDM_THREADS";
/// Work (probe × analysis frequency × measurement) above which a run is flagged.
const LONG_RUNNING_WORK: f64 = 1e12;
const DEFAULT_SIGMA_LN: f64 = 1e-16;
const DM_COHERENT_FRACTION: f64 = 0.1;

/// Compton frequencies to scan.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FrequencyGrid {
    Values { values: Vec<f64> },
    LogSpaced { f_min: f64, f_max: f64, points: usize },
}

impl Default for FrequencyGrid {
    fn default() -> Self {
        FrequencyGrid::LogSpaced {
            f_min: 1e-4,
            f_max: 1e2,
            points: 10,
        }
    }
}

impl FrequencyGrid {
    pub fn frequencies(&self) -> Result<Vec<f64>> {
        let out = match *self {
            FrequencyGrid::Values { ref values } => values.clone(),
            FrequencyGrid::LogSpaced { f_min, f_max, points } => {
                if !(f_min > 0.0 && f_max >= f_min) {
                    return Err(Error::param("fdm", format!("need 0 < f_min <= f_max, got [{f_min}, {f_max}]")));
                }
                match points {
                    0 => Vec::new(),
                    1 => vec![f_min],
                    n => {
                        let ratio = (f_max / f_min).ln();
                        (0..n)
                            .map(|i| f_min * (ratio * i as f64 / (n - 1) as f64).exp())
                            .collect()
                    }
                }
            }
        };
        if out.is_empty() {
            return Err(Error::param("grid", "frequency grid is empty"));
        }
        if let Some(f) = out.iter().find(|f| !(**f > 0.0 && f.is_finite())) {
            return Err(Error::param("grid", format!("frequencies must be positive, got {f}")));
        }
        Ok(out)
    }
}

/// How the dark matter signal is modelled for calibration and injections.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SignalModel {
    /// Deterministic when `T_m < 0.1 τ_c`, stochastic otherwise.
    #[default]
    Auto,
    /// Fixed amplitude, phase cycling through 0, π/2, π, 3π/2 across measurements.
    Deterministic,
    /// A fresh field realization per measurement.
    Stochastic,
}

/// Inputs to the conversion from fractional amplitude to the coupling `d_e`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExclusionParams {
    pub delta_k: f64,
    /// Local dark matter density, GeV/cm³.
    pub rho_dm: f64,
    pub overdensity: f64,
}

impl Default for ExclusionParams {
    fn default() -> Self {
        ExclusionParams {
            delta_k: units::THORIUM_DELTA_K,
            rho_dm: units::LOCAL_DM_DENSITY_GEV_CM3,
            overdensity: 1.0,
        }
    }
}

fn default_t_m() -> f64 {
    1e6
}

fn default_true() -> bool {
    true
}

fn default_analysis_points() -> usize {
    ANALYSIS_POINTS
}

fn default_points_on_line() -> usize {
    POINTS_ON_LINE
}

/// Campaign configuration as read from TOML. Unset fields take the
/// per-scheme defaults in [`CampaignConfig::resolve`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignConfig {
    pub scheme: Scheme,
    #[serde(default = "default_t_m")]
    pub t_m: f64,
    #[serde(default)]
    pub t_p: Option<f64>,
    #[serde(default)]
    pub grid: FrequencyGrid,
    #[serde(default)]
    pub n_measurements: Option<usize>,
    #[serde(default)]
    pub sigma_ln: Option<f64>,
    #[serde(default)]
    pub laser_noise: Option<LaserNoise>,
    #[serde(default = "default_true")]
    pub qpn: bool,
    /// BBDD mean pulse rate, or a fixed NBDD pulse frequency.
    #[serde(default)]
    pub f_pi: Option<f64>,
    #[serde(default)]
    pub f_pi_range: Option<[f64; 2]>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_analysis_points")]
    pub analysis_points: usize,
    #[serde(default = "default_points_on_line")]
    pub points_on_line: usize,
    #[serde(default)]
    pub signal_model: SignalModel,
    #[serde(default)]
    pub lineshape_model: LineshapeModel,
    /// Fractional amplitudes injected on top of the noise.
    #[serde(default)]
    pub injections: Vec<f64>,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub exclusion: ExclusionParams,
}

impl CampaignConfig {
    pub fn new(scheme: Scheme) -> Self {
        CampaignConfig {
            scheme,
            t_m: default_t_m(),
            t_p: None,
            grid: FrequencyGrid::default(),
            n_measurements: None,
            sigma_ln: None,
            laser_noise: None,
            qpn: true,
            f_pi: None,
            f_pi_range: None,
            seed: 0,
            analysis_points: ANALYSIS_POINTS,
            points_on_line: POINTS_ON_LINE,
            signal_model: SignalModel::Auto,
            lineshape_model: LineshapeModel::AsWritten,
            injections: Vec::new(),
            output: None,
            exclusion: ExclusionParams::default(),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Fills scheme defaults and validates.
    pub fn resolve(&self) -> Result<Campaign> {
        let t_p = self.t_p.unwrap_or(match self.scheme {
            Scheme::Ds => 100.0,
            Scheme::Nbdd => 1.0,
            Scheme::Bbdd => 0.25,
        });
        if !(t_p > 0.0 && t_p <= self.t_m && self.t_m.is_finite()) {
            return Err(Error::param("T_p", format!("need 0 < T_p <= T_m, got T_p={t_p}, T_m={}", self.t_m)));
        }
        let n_measurements = self.n_measurements.unwrap_or(match self.scheme {
            Scheme::Ds => 1000,
            _ => MIN_REALIZATIONS,
        });
        if n_measurements == 0 {
            return Err(Error::param("n_measurements", "need at least one measurement"));
        }
        let plan = match self.scheme {
            Scheme::Ds => SequencePlan::Ramsey,
            Scheme::Nbdd => {
                let [lo, hi] = match (self.f_pi_range, self.f_pi) {
                    (Some(r), _) => r,
                    (None, Some(f)) => [f, f],
                    (None, None) => [2.0, 5.0],
                };
                SequencePlan::Nbdd { f_pi_min: lo, f_pi_max: hi }
            }
            Scheme::Bbdd => SequencePlan::Bbdd {
                rate: self.f_pi.unwrap_or(20.0),
            },
        };
        plan.validate()?;
        let noise = match (self.laser_noise, self.sigma_ln) {
            (Some(LaserNoise::Flicker { mandelbrot, .. }), Some(s)) => LaserNoise::Flicker { sigma_ln: s, mandelbrot },
            (Some(n), _) => n,
            (None, s) if self.scheme == Scheme::Ds && s.is_none() => LaserNoise::lattice_default(),
            (None, s) => LaserNoise::flicker(s.unwrap_or(DEFAULT_SIGMA_LN)),
        };
        noise.validate()?;
        if self.analysis_points < 2 {
            return Err(Error::param("analysis_points", "need at least two"));
        }
        if let Some(a) = self.injections.iter().find(|a| !(**a >= 0.0 && a.is_finite())) {
            return Err(Error::param("injections", format!("amplitudes must be non-negative, got {a}")));
        }
        let frequencies = self.grid.frequencies()?;
        let n_probes = (self.t_m / t_p).floor() as usize;
        let campaign = Campaign {
            config: self.clone(),
            t_p,
            n_measurements,
            n_probes,
            plan,
            noise,
            frequencies,
            clock_frequency: units::thorium_clock_frequency(),
        };
        if campaign.is_long_running() {
            log::warn!(
                "campaign is large (~{:.1e} probe-frequency evaluations); expect a long run",
                campaign.work()
            );
        }
        Ok(campaign)
    }
}

/// A validated campaign with defaults filled in.
#[derive(Clone, Debug)]
pub struct Campaign {
    pub config: CampaignConfig,
    pub t_p: f64,
    pub n_measurements: usize,
    pub n_probes: usize,
    pub plan: SequencePlan,
    pub noise: LaserNoise,
    pub frequencies: Vec<f64>,
    pub clock_frequency: f64,
}

impl Campaign {
    pub fn t_m(&self) -> f64 {
        self.config.t_m
    }

    /// Laser-noise sampling step: `0.01 / f_DM`, at most `T_p / 100`.
    pub fn noise_step(&self, f_dm: f64) -> f64 {
        (0.01 / f_dm).min(self.t_p / 100.0)
    }

    pub fn work(&self) -> f64 {
        self.frequencies.len() as f64
            * self.n_measurements as f64
            * self.n_probes as f64
            * self.config.analysis_points as f64
    }

    pub fn is_long_running(&self) -> bool {
        self.work() > LONG_RUNNING_WORK
    }

    fn deterministic_signal(&self, params: &DmParameters) -> bool {
        match self.config.signal_model {
            SignalModel::Deterministic => true,
            SignalModel::Stochastic => false,
            SignalModel::Auto => self.t_m() < DM_COHERENT_FRACTION * params.coherence_time(),
        }
    }

    /// Simulates and analyses one grid point.
    pub fn run_point(&self, index: usize) -> Result<SensitivityResult> {
        let f_dm = self.frequencies[index];
        let ctx = PointContext::new(self, index, f_dm)?;
        let outcomes: Vec<Result<Outcome>> = (0..self.n_measurements)
            .into_par_iter()
            .map(|m| ctx.measure(m))
            .collect();
        let outcomes = outcomes.into_iter().collect::<Result<Vec<_>>>()?;
        ctx.summarize(&outcomes)
    }
}

/// RNG for measurement `m` at grid point `index`.
pub fn measurement_rng(seed: u64, index: usize, m: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((index as u64) << 32) | m as u64);
    rng
}

struct PointContext<'a> {
    campaign: &'a Campaign,
    index: usize,
    params: DmParameters,
    grid: AnalysisGrid,
    lineshape: Vec<f64>,
    noise: NoiseStream,
    deterministic: bool,
    f_index: usize,
}

struct Outcome {
    noise_fit: Option<FitResult>,
    signal_fit: Option<FitResult>,
    injection_fits: Vec<Option<FitResult>>,
    noise_at_fdm: f64,
    signal_at_fdm: f64,
    noise_sum: f64,
    noise_sum_sq: f64,
    phi_noise: Vec<f64>,
    phi_signal: Vec<f64>,
}

impl<'a> PointContext<'a> {
    fn new(campaign: &'a Campaign, index: usize, f_dm: f64) -> Result<Self> {
        let params = DmParameters::new(f_dm, 1.0)?;
        let grid = AnalysisGrid::around_line(&params, campaign.t_m(), campaign.config.analysis_points)?;
        let lineshape = expected_lineshape_with(
            campaign.config.lineshape_model,
            &grid.frequencies(),
            &params,
            campaign.t_m(),
        )?;
        let noise = NoiseStream::new(&campaign.noise, campaign.clock_frequency, campaign.noise_step(f_dm))?;
        let f_index = ((f_dm - grid.start) / grid.step).round().clamp(0.0, (grid.len - 1) as f64) as usize;
        Ok(PointContext {
            campaign,
            index,
            deterministic: campaign.deterministic_signal(&params),
            params,
            grid,
            lineshape,
            noise,
            f_index,
        })
    }

    fn measure(&self, m: usize) -> Result<Outcome> {
        let c = self.campaign;
        let mut rng = measurement_rng(c.config.seed, self.index, m);
        let signal = if self.deterministic {
            let theta = (m % 4) as f64 * 0.5 * PI;
            DmRealization::deterministic(self.params.f_dm, c.n_probes, c.t_p, 1.0, theta)
        } else {
            dm::synthesize_realization(&self.params, c.t_m(), c.t_p, c.config.points_on_line, &mut rng)?
        };
        let injections = &c.config.injections;
        let mut acc = CoherentAccumulator::new(self.grid, 2 + injections.len());
        let mut noise = self.noise.clone();
        let mut phases = vec![0.0; 2 + injections.len()];
        let (mut sum, mut sum_sq) = (0.0, 0.0);
        for j in 0..c.n_probes {
            let center = (j as f64 + 0.5) * c.t_p;
            let seq = c.plan.draw(center, c.t_p, &mut rng)?;
            let laser = noise.probe_phase(&seq, &mut rng)?;
            let qpn = if c.config.qpn { qpn_phase(&mut rng) } else { 0.0 };
            let phi_n = laser + qpn;
            let phi_s = probe_signal_phase(&seq, signal.probes[j], self.params.f_dm, c.clock_frequency);
            phases[0] = phi_n;
            phases[1] = phi_s;
            for (slot, a) in phases[2..].iter_mut().zip(injections) {
                *slot = phi_n + a * phi_s;
            }
            acc.add(&seq, &phases)?;
            sum += phi_n;
            sum_sq += phi_n * phi_n;
        }
        let spectra = acc.finish()?;
        let fit = |k: usize| match fit_amplitude(&spectra[k], &self.lineshape, c.t_m(), c.t_p) {
            Ok(f) => Some(f),
            Err(e) => {
                log::warn!("grid point {} measurement {m}: {e}", self.index);
                None
            }
        };
        Ok(Outcome {
            noise_fit: fit(0),
            signal_fit: fit(1),
            injection_fits: (0..injections.len()).map(|k| fit(2 + k)).collect(),
            noise_at_fdm: spectra[0].phi_m[self.f_index],
            signal_at_fdm: spectra[1].phi_m[self.f_index],
            noise_sum: sum,
            noise_sum_sq: sum_sq,
            phi_noise: spectra[0].phi_m.clone(),
            phi_signal: spectra[1].phi_m.clone(),
        })
    }

    fn summarize(&self, outcomes: &[Outcome]) -> Result<SensitivityResult> {
        let c = self.campaign;
        let noise_fits: Vec<FitResult> = outcomes.iter().filter_map(|o| o.noise_fit).collect();
        let signal_fits: Vec<FitResult> = outcomes.iter().filter_map(|o| o.signal_fit).collect();
        if noise_fits.is_empty() || signal_fits.is_empty() {
            return Err(Error::FitDidNotConverge {
                attempts: outcomes.len(),
                mse: f64::NAN,
            });
        }
        let p1_per_unit = signal_fits.iter().map(|f| f.p1).sum::<f64>() / signal_fits.len() as f64;
        let noise_p1: Vec<f64> = noise_fits.iter().map(|f| f.p1).collect();
        let q95 = quantile(&noise_p1, 0.95).unwrap_or(0.0);
        let bound_95 = if noise_p1.len() >= MIN_REALIZATIONS {
            analysis::detectable_amplitude_95(&noise_p1, p1_per_unit)?
        } else {
            log::warn!(
                "grid point {}: {} noise-only fits, fewer than {MIN_REALIZATIONS}; bound is indicative only",
                self.index,
                noise_p1.len()
            );
            q95 / p1_per_unit
        };
        let noise_at: Vec<f64> = outcomes.iter().map(|o| o.noise_at_fdm).collect();
        let signal_at: Vec<f64> = outcomes.iter().map(|o| o.signal_at_fdm).collect();
        let n_total = (outcomes.len() * c.n_probes) as f64;
        let sum: f64 = outcomes.iter().map(|o| o.noise_sum).sum();
        let sum_sq: f64 = outcomes.iter().map(|o| o.noise_sum_sq).sum();
        let var = (sum_sq - sum * sum / n_total) / (n_total - 1.0).max(1.0);
        let median = |v: Vec<f64>| quantile(&v, 0.5).unwrap_or(f64::NAN);
        let injections = c
            .config
            .injections
            .iter()
            .enumerate()
            .map(|(k, &amplitude)| {
                let fits: Vec<f64> = outcomes.iter().filter_map(|o| o.injection_fits[k]).map(|f| f.p1).collect();
                let p1_median = median(fits);
                InjectionSummary {
                    amplitude,
                    p1_median,
                    recovered_amplitude: p1_median / p1_per_unit,
                }
            })
            .collect();
        let mean_of = |get: fn(&Outcome) -> &Vec<f64>| {
            let mut acc = vec![0.0; self.grid.len];
            for o in outcomes {
                for (a, v) in acc.iter_mut().zip(get(o)) {
                    *a += v;
                }
            }
            acc.iter().map(|a| a / outcomes.len() as f64).collect::<Vec<f64>>()
        };
        let analytic = ramsey_analytic_sensitivity(self.params.f_dm, c.t_p, c.t_m(), c.clock_frequency);
        let fit_failures = outcomes
            .iter()
            .map(|o| {
                usize::from(o.noise_fit.is_none())
                    + usize::from(o.signal_fit.is_none())
                    + o.injection_fits.iter().filter(|f| f.is_none()).count()
            })
            .sum();
        Ok(SensitivityResult {
            schema_version: SCHEMA_VERSION,
            grid_index: self.index,
            f_dm: self.params.f_dm,
            scheme: c.plan.scheme(),
            t_p: c.t_p,
            t_m: c.t_m(),
            sigma_ln: c.noise.sigma(),
            n_probes: c.n_probes,
            n_measurements: outcomes.len(),
            seed: c.config.seed,
            bound_95,
            analytic_ramsey: analytic.bound,
            analytic_in_band: analytic.in_band,
            sigma_fractional: fractional_uncertainty(&noise_at, &signal_at)?,
            fit: FitDiagnostics {
                signal_model: if self.deterministic {
                    SignalModel::Deterministic
                } else {
                    SignalModel::Stochastic
                },
                p1_per_unit,
                noise_p1_q95: q95,
                noise_p1_median: median(noise_p1),
                noise_p2_median: median(noise_fits.iter().map(|f| f.p2).collect()),
                noise_mse_median: median(noise_fits.iter().map(|f| f.mse).collect()),
                predicted_floor: (c.n_probes as f64 * var).sqrt(),
                probe_noise_variance: var,
                fit_failures,
            },
            injections,
            frequencies: self.grid.frequencies(),
            lineshape: self.lineshape.clone(),
            mean_phi_noise: mean_of(|o| &o.phi_noise),
            mean_phi_signal: mean_of(|o| &o.phi_signal),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InjectionSummary {
    /// Injected fractional amplitude.
    pub amplitude: f64,
    pub p1_median: f64,
    /// `p1_median / p1_per_unit`.
    pub recovered_amplitude: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    pub signal_model: SignalModel,
    /// Mean fitted `p₁` of the noise-free signal per unit fractional amplitude.
    pub p1_per_unit: f64,
    pub noise_p1_q95: f64,
    pub noise_p1_median: f64,
    pub noise_p2_median: f64,
    pub noise_mse_median: f64,
    /// `sqrt(N_p Var(φ_N,j))`.
    pub predicted_floor: f64,
    pub probe_noise_variance: f64,
    pub fit_failures: usize,
}

/// One grid point of a campaign. Spectra are means over measurements;
/// `mean_phi_signal` is per unit fractional amplitude.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensitivityResult {
    pub schema_version: u32,
    pub grid_index: usize,
    pub f_dm: f64,
    pub scheme: Scheme,
    pub t_p: f64,
    pub t_m: f64,
    pub sigma_ln: f64,
    pub n_probes: usize,
    pub n_measurements: usize,
    pub seed: u64,
    /// Detectable fractional amplitude at 95% confidence.
    pub bound_95: f64,
    pub analytic_ramsey: f64,
    pub analytic_in_band: bool,
    /// Fractional uncertainty from the mean-square noise and signal statistics.
    pub sigma_fractional: f64,
    pub fit: FitDiagnostics,
    pub injections: Vec<InjectionSummary>,
    pub frequencies: Vec<f64>,
    pub lineshape: Vec<f64>,
    pub mean_phi_noise: Vec<f64>,
    pub mean_phi_signal: Vec<f64>,
}

/// Bound on the coupling `d_e` at one mass.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExclusionPoint {
    pub f_dm: f64,
    pub m_phi_ev: f64,
    pub fractional_bound: f64,
    pub d_e: f64,
    pub scheme: Scheme,
}

/// `d_e = (δν/ν) / (ΔK κ Φ₀)` with `Φ₀ = √(2ρ) / m` in natural units.
pub fn to_exclusion(result: &SensitivityResult, params: &ExclusionParams) -> ExclusionPoint {
    let m_phi_ev = units::mass_from_frequency(result.f_dm);
    let phi0 = units::field_amplitude_ev(params.rho_dm * params.overdensity, m_phi_ev);
    ExclusionPoint {
        f_dm: result.f_dm,
        m_phi_ev,
        fractional_bound: result.bound_95,
        d_e: result.bound_95 / (params.delta_k * units::kappa() * phi0),
        scheme: result.scheme,
    }
}

/// Thread count from an explicit value, else the environment, else all cores.
pub fn thread_count(explicit: Option<usize>) -> Option<usize> {
    explicit.or_else(|| std::env::var(THREADS_ENV).ok().and_then(|v| v.trim().parse().ok()))
}

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub threads: Option<usize>,
    /// Continue a previous run recorded in the manifest next to the output.
    pub resume: bool,
}

#[derive(Clone, Debug, Default)]
pub struct CampaignReport {
    pub results: Vec<SensitivityResult>,
    /// Grid points that failed, with the error message.
    pub failures: Vec<(usize, String)>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    /// The resolved configuration the results belong to.
    pub fingerprint: String,
    pub completed: Vec<usize>,
    pub failed: Vec<usize>,
}

pub fn manifest_path(output: &Path) -> PathBuf {
    let mut name = output.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    output.with_file_name(name)
}

fn fingerprint(config: &CampaignConfig) -> Result<String> {
    let mut c = config.clone();
    c.output = None;
    Ok(serde_json::to_string(&c)?)
}

/// Runs every grid point in order. Measurements within a point run in
/// parallel. With an output path, each finished point is appended as one
/// JSON line and recorded in the manifest.
pub fn run_campaign(config: &CampaignConfig, options: &RunOptions) -> Result<CampaignReport> {
    let campaign = config.resolve()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_count(options.threads) {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;

    let mut report = CampaignReport::default();
    let mut manifest = Manifest {
        schema_version: SCHEMA_VERSION,
        fingerprint: fingerprint(config)?,
        ..Manifest::default()
    };
    let output = config.output.as_deref();
    if let Some(path) = output {
        let mpath = manifest_path(path);
        if options.resume && mpath.exists() {
            let text = fs::read_to_string(&mpath).map_err(|e| Error::io(&mpath, e))?;
            let previous: Manifest = serde_json::from_str(&text)?;
            if previous.fingerprint != manifest.fingerprint {
                return Err(Error::Config(format!(
                    "{} belongs to a different configuration",
                    mpath.display()
                )));
            }
            report.results = read_results(path)?;
            manifest.completed = report.results.iter().map(|r| r.grid_index).collect();
        } else {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            }
            File::create(path).map_err(|e| Error::io(path, e))?;
        }
        write_manifest(&mpath, &manifest)?;
    }

    for index in 0..campaign.frequencies.len() {
        if manifest.completed.contains(&index) {
            continue;
        }
        let f_dm = campaign.frequencies[index];
        log::info!("grid point {index}: f_DM = {f_dm:e} Hz");
        match pool.install(|| campaign.run_point(index)) {
            Ok(result) => {
                if let Some(path) = output {
                    append_result(path, &result)?;
                    manifest.completed.push(index);
                    write_manifest(&manifest_path(path), &manifest)?;
                }
                report.results.push(result);
            }
            Err(e) => {
                log::error!("grid point {index} (f_DM = {f_dm:e} Hz) failed: {e}");
                manifest.failed.push(index);
                if let Some(path) = output {
                    write_manifest(&manifest_path(path), &manifest)?;
                }
                report.failures.push((index, e.to_string()));
            }
        }
    }
    Ok(report)
}

fn write_manifest(path: &Path, manifest: &Manifest) -> Result<()> {
    let text = serde_json::to_string_pretty(manifest)?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

fn append_result(path: &Path, result: &SensitivityResult) -> Result<()> {
    let file = OpenOptions::new()
        .append(true)
        .open(path)
        .map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer(&mut w, result)?;
    writeln!(w).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads a JSON-lines result file, rejecting other schema versions.
pub fn read_results(path: &Path) -> Result<Vec<SensitivityResult>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value = serde_json::from_str(&line)?;
        let version = value.get("schema_version").and_then(|v| v.as_u64());
        if version != Some(u64::from(SCHEMA_VERSION)) {
            return Err(Error::Config(format!(
                "{}: schema version {version:?}, expected {SCHEMA_VERSION}",
                path.display()
            )));
        }
        out.push(serde_json::from_value(value)?);
    }
    Ok(out)
}

/// Two columns, `f_dm,bound_95`.
pub fn write_bounds_csv<W: Write>(results: &[SensitivityResult], mut w: W) -> std::io::Result<()> {
    writeln!(w, "f_dm,bound_95")?;
    for r in results {
        writeln!(w, "{:e},{:e}", r.f_dm, r.bound_95)?;
    }
    Ok(())
}

pub fn write_exclusion_csv<W: Write>(points: &[ExclusionPoint], mut w: W) -> std::io::Result<()> {
    writeln!(w, "m_phi_ev,d_e,fractional_bound,scheme")?;
    for p in points {
        writeln!(w, "{:e},{:e},{:e},{}", p.m_phi_ev, p.d_e, p.fractional_bound, p.scheme)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(scheme: Scheme) -> CampaignConfig {
        CampaignConfig {
            t_m: 200.0,
            t_p: Some(if scheme == Scheme::Ds { 10.0 } else { 0.25 }),
            grid: FrequencyGrid::Values { values: vec![2.0] },
            n_measurements: Some(6),
            analysis_points: 120,
            ..CampaignConfig::new(scheme)
        }
    }

    #[test]
    fn scheme_defaults() {
        let ds = CampaignConfig::new(Scheme::Ds).resolve().unwrap();
        assert_eq!((ds.t_p, ds.n_measurements), (100.0, 1000));
        assert_eq!(ds.noise, LaserNoise::lattice_default());
        let nb = CampaignConfig::new(Scheme::Nbdd).resolve().unwrap();
        assert_eq!(nb.t_p, 1.0);
        assert_eq!(nb.plan, SequencePlan::Nbdd { f_pi_min: 2.0, f_pi_max: 5.0 });
        let bb = CampaignConfig::new(Scheme::Bbdd).resolve().unwrap();
        assert_eq!((bb.t_p, bb.n_measurements), (0.25, 100));
        assert_eq!(bb.plan, SequencePlan::Bbdd { rate: 20.0 });
        assert_eq!(bb.noise.sigma(), 1e-16);
        // full-size campaign
        assert!(bb.is_long_running());
        assert!(bb.frequencies.len() == 10 && (bb.frequencies[0] - 1e-4).abs() < 1e-18);
    }

    #[test]
    fn noise_step_is_capped() {
        let c = small(Scheme::Bbdd).resolve().unwrap();
        assert_eq!(c.noise_step(1.0), 0.0025);
        assert!((c.noise_step(10.0) - 0.001).abs() < 1e-15);
    }

    #[test]
    fn invalid_configs() {
        let mut c = small(Scheme::Ds);
        c.t_p = Some(1e3);
        assert!(matches!(c.resolve(), Err(Error::InvalidParameter { .. })));
        let mut c = small(Scheme::Ds);
        c.grid = FrequencyGrid::Values { values: vec![] };
        assert!(c.resolve().is_err());
        let mut c = small(Scheme::Ds);
        c.n_measurements = Some(0);
        assert!(c.resolve().is_err());
        assert!(matches!(
            CampaignConfig::from_toml_str("scheme = \"bbdd\"\nbogus = 1\n"),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn toml_round_trip() {
        let mut c = small(Scheme::Nbdd);
        c.laser_noise = Some(LaserNoise::flicker(3e-17));
        c.injections = vec![1e-18];
        let text = c.to_toml_string().unwrap();
        assert_eq!(CampaignConfig::from_toml_str(&text).unwrap(), c);
    }

    #[test]
    fn log_grid() {
        let g = FrequencyGrid::LogSpaced {
            f_min: 0.1,
            f_max: 100.0,
            points: 4,
        };
        let f = g.frequencies().unwrap();
        for (a, b) in f.iter().zip([0.1, 1.0, 10.0, 100.0]) {
            assert!((a / b - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn streams_are_distinct() {
        use rand::Rng;
        let a: u64 = measurement_rng(1, 0, 1).random();
        let b: u64 = measurement_rng(1, 1, 0).random();
        let c: u64 = measurement_rng(1, 0, 1).random();
        assert_ne!(a, b);
        assert_eq!(a, c);
    }

    #[test]
    fn point_runs_for_every_scheme() {
        for scheme in [Scheme::Ds, Scheme::Nbdd, Scheme::Bbdd] {
            let c = small(scheme).resolve().unwrap();
            let r = c.run_point(0).unwrap();
            assert_eq!(r.frequencies.len(), 120);
            assert!(r.bound_95 > 0.0 && r.bound_95.is_finite(), "{scheme}: {}", r.bound_95);
            assert!(r.mean_phi_noise.iter().all(|v| *v >= 0.0));
            assert_eq!(r.fit.signal_model, SignalModel::Deterministic);
        }
    }

    #[test]
    fn exclusion_scaling() {
        let c = small(Scheme::Ds).resolve().unwrap();
        let r = c.run_point(0).unwrap();
        let base = to_exclusion(&r, &ExclusionParams::default());
        let k2 = to_exclusion(&r, &ExclusionParams { delta_k: 2e4, ..Default::default() });
        let rho2 = to_exclusion(&r, &ExclusionParams { overdensity: 2.0, ..Default::default() });
        assert!((k2.d_e / base.d_e - 0.5).abs() < 1e-12);
        assert!((rho2.d_e / base.d_e - 0.5f64.sqrt()).abs() < 1e-12);
        assert!((base.m_phi_ev - 2.0 * units::PLANCK_EV_S).abs() < 1e-24);
        // d_e = bound / (ΔK κ Φ₀) with κΦ₀ ≈ 1.74e-16 / f at 0.4 GeV/cm³
        let expected = r.bound_95 / (1e4 * 1.74e-16 / 2.0);
        assert!((base.d_e / expected - 1.0).abs() < 0.01);
    }

    #[test]
    fn csv_export() {
        let c = small(Scheme::Ds).resolve().unwrap();
        let r = c.run_point(0).unwrap();
        let mut out = Vec::new();
        write_bounds_csv(std::slice::from_ref(&r), &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "f_dm,bound_95");
        let cols: Vec<f64> = lines[1].split(',').map(|v| v.parse().unwrap()).collect();
        assert_eq!(cols, vec![r.f_dm, r.bound_95]);
    }
}
