// Copyright 2026 The clockdm Authors
// SPDX-License-Identifier: Apache-2.0

//! Coherent analysis of probe phases, lineshape fitting and detection bounds.
//!
//! Each probe contributes its measured phase `φ_M,j` to an in-phase and a
//! quadrature sum with the signs of `g_I,j(f)` and `g_Q,j(f)`. A signal at the
//! analysis frequency adds up coherently while noise adds in quadrature:
//!
//! `φ_M(f) = sqrt(½ (Σ_j sgn(g_I,j(f)) φ_M,j)² + ½ (Σ_j sgn(g_Q,j(f)) φ_M,j)²)`.
//!
//! The resulting spectrum is fitted with `sqrt(p₁² F_c² + p₂²)`, where `F_c`
//! is the expected lineshape, and the 95th percentile of `p₁` over noise-only
//! realizations gives the detectable amplitude.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dm::DmParameters;
use crate::error::{Error, Result};
use crate::sequence::{sinc, PulseSequence};

/// Detection threshold of the analytic Ramsey bound.
pub const X_DET_95: f64 = 3.95;
/// Sidelobes of `sinc(f T_m)` kept on either side of the line.
pub const GRID_LOBES: f64 = 10.0;
/// Default number of analysis frequencies across the line.
pub const ANALYSIS_POINTS: usize = 1000;
/// Fewest noise-only realizations accepted for a 95% bound.
pub const MIN_REALIZATIONS: usize = 100;
/// Largest analysis grid spacing, in units of `1/T_m`.
const MAX_SPACING: f64 = 0.5;
/// Half-width of the convolution window, in units of `1/T_m`.
const CONVOLUTION_LOBES: f64 = 1000.0;
/// Below `T_m / τ_c` of this, the line is narrower than the Fourier limit.
const COHERENT_FRACTION: f64 = 0.1;

/// Accumulated phases of one probe, in radians.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ProbeRecord {
    pub signal: f64,
    pub laser: f64,
    pub qpn: f64,
}

impl ProbeRecord {
    /// `φ_M,j = φ_S,j + φ_LN,j + φ_QPN,j`.
    pub fn total(&self) -> f64 {
        self.signal + self.laser + self.qpn
    }

    pub fn noise(&self) -> f64 {
        self.laser + self.qpn
    }
}

fn sgn(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Coherent statistic at one frequency from `(sequence, φ_M,j)` pairs.
pub fn coherent_combine(probes: &[(PulseSequence, f64)], f: f64) -> Result<f64> {
    if probes.is_empty() {
        return Err(Error::NoProbes);
    }
    let (mut si, mut sq) = (0.0, 0.0);
    for (seq, phi) in probes {
        let q = seq.quadrature_components(f);
        si += sgn(q.g_i) * phi;
        sq += sgn(q.g_q) * phi;
    }
    Ok((0.5 * (si * si + sq * sq)).sqrt())
}

/// Uniform grid of analysis frequencies.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalysisGrid {
    pub start: f64,
    pub step: f64,
    pub len: usize,
}

impl AnalysisGrid {
    pub fn uniform(start: f64, end: f64, len: usize) -> Result<Self> {
        if len < 2 {
            return Err(Error::param("analysis_points", "need at least two frequencies"));
        }
        if !(start > 0.0 && end > start && end.is_finite()) {
            return Err(Error::param(
                "analysis_grid",
                format!("need 0 < start < end, got [{start}, {end}]"),
            ));
        }
        Ok(AnalysisGrid {
            start,
            step: (end - start) / (len - 1) as f64,
            len,
        })
    }

    /// Grid spanning the line support plus [`GRID_LOBES`] Fourier widths on
    /// each side, clipped to positive frequencies.
    pub fn around_line(params: &DmParameters, t_m: f64, len: usize) -> Result<Self> {
        let (lo, hi) = params.support();
        let pad = GRID_LOBES / t_m;
        let start = (params.f_dm + lo - pad).max(params.f_dm * 1e-3);
        let grid = Self::uniform(start, params.f_dm + hi + pad, len)?;
        grid.check_resolution(t_m)?;
        Ok(grid)
    }

    pub fn check_resolution(&self, t_m: f64) -> Result<()> {
        if self.step > MAX_SPACING / t_m * (1.0 + 1e-9) {
            return Err(Error::CoarseGrid {
                spacing: self.step,
                resolution: 1.0 / t_m,
            });
        }
        Ok(())
    }

    pub fn frequency(&self, k: usize) -> f64 {
        self.start + k as f64 * self.step
    }

    pub fn frequencies(&self) -> Vec<f64> {
        (0..self.len).map(|k| self.frequency(k)).collect()
    }

    pub fn end(&self) -> f64 {
        self.frequency(self.len - 1)
    }
}

/// `e^{2πi f τ}` with the phase reduced modulo one turn before scaling.
fn turn(f: f64, tau: f64) -> Complex64 {
    let cycles = f * tau;
    Complex64::from_polar(1.0, 2.0 * PI * (cycles - cycles.round()))
}

/// Sign-weighted sums over probes for several phase channels at once, over a
/// whole analysis grid.
#[derive(Clone, Debug)]
pub struct CoherentAccumulator {
    grid: AnalysisGrid,
    channels: usize,
    sum_i: Vec<f64>,
    sum_q: Vec<f64>,
    scratch: Vec<Complex64>,
    probes: usize,
}

impl CoherentAccumulator {
    pub fn new(grid: AnalysisGrid, channels: usize) -> Self {
        CoherentAccumulator {
            grid,
            channels,
            sum_i: vec![0.0; channels * grid.len],
            sum_q: vec![0.0; channels * grid.len],
            scratch: vec![Complex64::new(0.0, 0.0); grid.len],
            probes: 0,
        }
    }

    /// Adds one probe with one phase per channel.
    pub fn add(&mut self, seq: &PulseSequence, phases: &[f64]) -> Result<()> {
        if phases.len() != self.channels {
            return Err(Error::GridMismatch {
                left: phases.len(),
                right: self.channels,
            });
        }
        // Σ_n w_n e^{2πifτ_n} = 2πif (g_I + i g_Q), so for f > 0
        // sgn g_I = sgn Im Σ and sgn g_Q = -sgn Re Σ.
        self.scratch.fill(Complex64::new(0.0, 0.0));
        for (tau, w) in seq.boundary_weights() {
            let mut z = turn(self.grid.start, tau) * w;
            let rot = turn(self.grid.step, tau);
            for s in self.scratch.iter_mut() {
                *s += z;
                z *= rot;
            }
        }
        let len = self.grid.len;
        for (c, &phi) in phases.iter().enumerate() {
            let si = &mut self.sum_i[c * len..(c + 1) * len];
            let sq = &mut self.sum_q[c * len..(c + 1) * len];
            for ((s, a), b) in self.scratch.iter().zip(si.iter_mut()).zip(sq.iter_mut()) {
                *a += sgn(s.im) * phi;
                *b -= sgn(s.re) * phi;
            }
        }
        self.probes += 1;
        Ok(())
    }

    pub fn probes(&self) -> usize {
        self.probes
    }

    /// One spectrum per channel.
    pub fn finish(self) -> Result<Vec<MeasuredSpectrum>> {
        if self.probes == 0 {
            return Err(Error::NoProbes);
        }
        let len = self.grid.len;
        let frequencies = self.grid.frequencies();
        Ok((0..self.channels)
            .map(|c| {
                let phi_m = (0..len)
                    .map(|k| {
                        let a = self.sum_i[c * len + k];
                        let b = self.sum_q[c * len + k];
                        (0.5 * (a * a + b * b)).sqrt()
                    })
                    .collect();
                MeasuredSpectrum {
                    frequencies: frequencies.clone(),
                    phi_m,
                }
            })
            .collect())
    }
}

/// `φ_M(f)` over an analysis grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasuredSpectrum {
    pub frequencies: Vec<f64>,
    pub phi_m: Vec<f64>,
}

impl MeasuredSpectrum {
    pub fn len(&self) -> usize {
        self.phi_m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phi_m.is_empty()
    }

    /// Value at the grid point closest to `f`.
    pub fn nearest(&self, f: f64) -> f64 {
        let k = self
            .frequencies
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - f).abs().total_cmp(&(b.1 - f).abs()))
            .map_or(0, |(k, _)| k);
        self.phi_m[k]
    }
}

/// Template the measured spectrum is fitted to.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LineshapeModel {
    /// `F ⊛ |sinc(f T_m)|`.
    #[default]
    AsWritten,
    /// `sqrt(F ⊛ sinc²(f T_m))`, the mean of a Rayleigh-distributed amplitude
    /// whose power follows the line.
    Amplitude,
}

/// Expected lineshape `F_c` on the grid, normalized to unit peak.
///
/// For `T_m < 0.1 τ_c` this is `|sinc((f − f_DM) T_m)|`. Otherwise the line
/// `F` is convolved with `|sinc(f' T_m)|` over `|f'| ≤ 1000/T_m`, sampled at
/// `10⁵` points when `T_m > τ_c` and `10⁶` points otherwise.
pub fn expected_lineshape(frequencies: &[f64], params: &DmParameters, t_m: f64) -> Result<Vec<f64>> {
    expected_lineshape_with(LineshapeModel::AsWritten, frequencies, params, t_m)
}

pub fn expected_lineshape_with(
    model: LineshapeModel,
    frequencies: &[f64],
    params: &DmParameters,
    t_m: f64,
) -> Result<Vec<f64>> {
    if let [a, b, ..] = frequencies {
        let spacing = frequencies
            .windows(2)
            .map(|w| (w[1] - w[0]).abs())
            .fold((b - a).abs(), f64::max);
        if spacing > MAX_SPACING / t_m * (1.0 + 1e-9) {
            return Err(Error::CoarseGrid {
                spacing,
                resolution: 1.0 / t_m,
            });
        }
    }
    let tau_c = params.coherence_time();
    if t_m < COHERENT_FRACTION * tau_c {
        return Ok(frequencies
            .iter()
            .map(|f| sinc((f - params.f_dm) * t_m).abs())
            .collect());
    }
    let kernel = |x: f64| match model {
        LineshapeModel::AsWritten => sinc(x).abs(),
        LineshapeModel::Amplitude => sinc(x).powi(2),
    };
    let n_i = if t_m > tau_c { 100_000 } else { 1_000_000 };
    let half = CONVOLUTION_LOBES / t_m;
    let h = 2.0 * half / (n_i - 1) as f64;
    let (lo, hi) = params.support();
    let raw: Vec<f64> = frequencies
        .iter()
        .map(|f| {
            let delta = f - params.f_dm;
            // F(δ - f') vanishes unless lo ≤ δ - f' ≤ hi
            let i0 = (((delta - hi + half) / h).floor().max(0.0)) as usize;
            let i1 = ((((delta - lo + half) / h).ceil()) as usize).min(n_i - 1);
            let mut acc = 0.0;
            for i in i0..=i1.max(i0) {
                let fp = -half + i as f64 * h;
                acc += params.lineshape_at_offset(delta - fp) * kernel(fp * t_m);
            }
            let v = 4.0 * PI * acc * h;
            match model {
                LineshapeModel::AsWritten => v,
                LineshapeModel::Amplitude => v.sqrt(),
            }
        })
        .collect();
    let peak = raw.iter().copied().fold(0.0, f64::max);
    if peak == 0.0 {
        return Ok(raw);
    }
    Ok(raw.into_iter().map(|v| v / peak).collect())
}

/// Result of fitting `sqrt(p₁² F_c² + p₂²)` to a measured spectrum.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub p1: f64,
    pub p2: f64,
    pub mse: f64,
    /// Optimizer runs used, including the polishing restart.
    pub attempts: usize,
}

/// `mean((sqrt(p₁² F_c² + p₂²) − φ_M)²)`.
pub fn mse(p1: f64, p2: f64, lineshape: &[f64], phi_m: &[f64]) -> f64 {
    let sum: f64 = lineshape
        .iter()
        .zip(phi_m)
        .map(|(f, y)| {
            let r = (p1 * p1 * f * f + p2 * p2).sqrt() - y;
            r * r
        })
        .sum();
    sum / phi_m.len() as f64
}

const FIT_RESTARTS: usize = 5;
const FIT_MAX_EVALS: usize = 4000;
const FIT_XTOL: f64 = 1e-10;
const FIT_JITTER_SEED: u64 = 0x5eed;

/// Least-squares amplitude and floor. Starts from `p₁ = max F_c · max φ_M`,
/// `p₂ = sqrt(T_m / T_p) / 4`, polishes the best point once and falls back to
/// up to five jittered starts if the simplex does not contract.
pub fn fit_amplitude(spectrum: &MeasuredSpectrum, lineshape: &[f64], t_m: f64, t_p: f64) -> Result<FitResult> {
    if lineshape.len() != spectrum.len() {
        return Err(Error::GridMismatch {
            left: spectrum.len(),
            right: lineshape.len(),
        });
    }
    if spectrum.is_empty() {
        return Err(Error::NoProbes);
    }
    let y = &spectrum.phi_m;
    let y_max = y.iter().copied().fold(0.0, f64::max);
    let f_max = lineshape.iter().copied().fold(0.0, f64::max);
    if y_max == 0.0 {
        return Ok(FitResult {
            p1: 0.0,
            p2: 0.0,
            mse: 0.0,
            attempts: 0,
        });
    }
    // Work in units of max φ_M so tolerances are scale free. The objective is
    // even in p₁ and p₂, so the search is unconstrained and the sign dropped.
    let scaled: Vec<f64> = y.iter().map(|v| v / y_max).collect();
    let objective = |p: [f64; 2]| mse(p[0], p[1], lineshape, &scaled);
    let start = [f_max, (t_m / t_p).sqrt() / 4.0 / y_max];

    let mut attempts = 0;
    let mut best = nelder_mead(&objective, start, FIT_MAX_EVALS, FIT_XTOL);
    attempts += 1;
    let polished = nelder_mead(&objective, best.x, FIT_MAX_EVALS, FIT_XTOL);
    attempts += 1;
    let mut converged = best.converged && polished.converged;
    if polished.f <= best.f {
        best = polished;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(FIT_JITTER_SEED);
    while !converged && attempts < 2 + FIT_RESTARTS {
        let jitter = [
            start[0] * rng.random_range(0.5..2.0),
            start[1].min(1.0) * rng.random_range(0.5..2.0),
        ];
        let run = nelder_mead(&objective, jitter, FIT_MAX_EVALS, FIT_XTOL);
        attempts += 1;
        converged = run.converged;
        if run.f <= best.f {
            best = run;
        }
    }
    let mse = best.f * y_max * y_max;
    if !converged || !mse.is_finite() {
        return Err(Error::FitDidNotConverge { attempts, mse });
    }
    Ok(FitResult {
        p1: best.x[0].abs() * y_max,
        p2: best.x[1].abs() * y_max,
        mse,
        attempts,
    })
}

struct Minimum {
    x: [f64; 2],
    f: f64,
    converged: bool,
}

/// Two-dimensional Nelder–Mead with the standard coefficients.
fn nelder_mead(f: &impl Fn([f64; 2]) -> f64, x0: [f64; 2], max_evals: usize, xtol: f64) -> Minimum {
    let step = |v: f64| if v.abs() > 1e-8 { 0.1 * v } else { 1e-3 };
    let mut simplex = [
        x0,
        [x0[0] + step(x0[0]), x0[1]],
        [x0[0], x0[1] + step(x0[1])],
    ];
    let mut values = simplex.map(f);
    let mut evals = 3;
    let lerp = |a: [f64; 2], b: [f64; 2], t: f64| [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
    loop {
        let mut order = [0, 1, 2];
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = order.map(|i| simplex[i]);
        values = order.map(|i| values[i]);

        let scale = simplex[0][0].abs().max(simplex[0][1].abs()).max(1e-300);
        let size = simplex[1..]
            .iter()
            .map(|p| (p[0] - simplex[0][0]).abs().max((p[1] - simplex[0][1]).abs()))
            .fold(0.0, f64::max);
        let spread = values[2] - values[0];
        if size <= xtol * scale && spread <= 1e-14 * values[0].abs() + 1e-28 {
            return Minimum {
                x: simplex[0],
                f: values[0],
                converged: true,
            };
        }
        if evals >= max_evals {
            return Minimum {
                x: simplex[0],
                f: values[0],
                converged: false,
            };
        }

        let centroid = lerp(simplex[0], simplex[1], 0.5);
        let reflected = lerp(centroid, simplex[2], -1.0);
        let fr = f(reflected);
        evals += 1;
        if fr < values[0] {
            let expanded = lerp(centroid, simplex[2], -2.0);
            let fe = f(expanded);
            evals += 1;
            if fe < fr {
                simplex[2] = expanded;
                values[2] = fe;
            } else {
                simplex[2] = reflected;
                values[2] = fr;
            }
        } else if fr < values[1] {
            simplex[2] = reflected;
            values[2] = fr;
        } else {
            let (target, ft) = if fr < values[2] { (reflected, fr) } else { (simplex[2], values[2]) };
            let contracted = lerp(centroid, target, 0.5);
            let fc = f(contracted);
            evals += 1;
            if fc < ft {
                simplex[2] = contracted;
                values[2] = fc;
            } else {
                for i in 1..3 {
                    simplex[i] = lerp(simplex[0], simplex[i], 0.5);
                    values[i] = f(simplex[i]);
                }
                evals += 2;
            }
        }
    }
}

/// Quantile `q ∈ [0, 1]` with linear interpolation between order statistics.
pub fn quantile(samples: &[f64], q: f64) -> Option<f64> {
    if samples.is_empty() || !(0.0..=1.0).contains(&q) {
        return None;
    }
    let mut v = samples.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    Some(v[lo] + (pos - lo as f64) * (v[hi] - v[lo]))
}

/// 95th percentile of noise-only `p₁` divided by the fitted `p₁` per unit
/// fractional amplitude of an injected signal.
pub fn detectable_amplitude_95(noise_p1: &[f64], p1_per_unit_amplitude: f64) -> Result<f64> {
    if noise_p1.len() < MIN_REALIZATIONS {
        return Err(Error::InsufficientRealizations {
            required: MIN_REALIZATIONS,
            got: noise_p1.len(),
        });
    }
    if !(p1_per_unit_amplitude > 0.0 && p1_per_unit_amplitude.is_finite()) {
        return Err(Error::param(
            "calibration",
            format!("p1 per unit amplitude must be positive, got {p1_per_unit_amplitude}"),
        ));
    }
    let q = quantile(noise_p1, 0.95).ok_or(Error::NoProbes)?;
    Ok(q / p1_per_unit_amplitude)
}

/// Analytic Ramsey bound and whether `f` lies in `10/T_m ≤ f ≤ 0.1/T_p`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalyticBound {
    pub f: f64,
    pub bound: f64,
    pub in_band: bool,
}

/// `X / (2π ν₀ sqrt(T_p T_m))`; with `ν₀ = 1` the bound in radians per second.
pub fn ramsey_analytic_sensitivity(f: f64, t_p: f64, t_m: f64, clock_frequency: f64) -> AnalyticBound {
    AnalyticBound {
        f,
        bound: X_DET_95 / (2.0 * PI * clock_frequency * (t_p * t_m).sqrt()),
        in_band: f >= 10.0 / t_m && f <= 0.1 / t_p,
    }
}

/// `sqrt(⟨φ_N²⟩ / ⟨φ̂_S²⟩)`, with `φ_N` the noise-only statistic and `φ̂_S`
/// the signal-only statistic per unit fractional amplitude, both averaged
/// over realizations at one frequency.
pub fn fractional_uncertainty(noise: &[f64], signal_per_unit: &[f64]) -> Result<f64> {
    if noise.is_empty() || signal_per_unit.is_empty() {
        return Err(Error::NoProbes);
    }
    let ms = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64;
    Ok((ms(noise) / ms(signal_per_unit)).sqrt())
}
