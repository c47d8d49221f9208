// Copyright 2026 The clockdm Authors
// SPDX-License-Identifier: Apache-2.0

//! Stochastic ultralight scalar dark matter field.
//!
//! The field is a superposition of modes around the Compton frequency `f_DM`
//! with random complex amplitudes whose mean power follows the lineshape
//! `F(ω)`. It is synthesized as a real time series by an inverse DFT of `N_f`
//! coefficients on a grid with step `dt = 0.1 / f_DM`.
//!
//! Only the bins that fall on the line carry power, so the inverse DFT is
//! evaluated sparsely: with `A(t) = (2/N_f) Σ_k φ̃_k e^{2πi k t / (N_f dt)}`
//! summed over the line bins `k` (offsets from the `f_DM` bin), the real series is
//! `x(t) = Re[A(t) e^{2πi f_DM t}]`, identical to the full transform at every
//! grid point. The per-probe amplitude `ν_S,j` and phase `θ_j` are the modulus
//! and argument of `A` demodulated over the probe window.

use std::f64::consts::PI;
use std::io::Write;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sequence::{sinc, PulseSequence};

/// Coherence time in oscillation periods: `τ_c f_DM`.
pub const COHERENCE_PERIODS: f64 = 1.0e6;
/// Synthesis time step in oscillation periods: `dt f_DM`.
pub const DM_STEP_PERIODS: f64 = 0.1;
/// Default number of frequency bins across the line.
pub const POINTS_ON_LINE: usize = 1000;
/// Width of the line support in standard deviations of `√(η² + 2x)`.
const SUPPORT_SIGMAS: f64 = 5.5;
const MAX_DENSE_LEN: u64 = 1 << 24;

/// Treatment of the lineshape below the Compton frequency.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LineshapeConvention {
    /// The closed form as printed, zero where the square root argument is negative.
    #[default]
    AsWritten,
    /// Zero for every `ω < 2π f_DM`.
    OneSided,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DmParameters {
    /// Compton frequency, Hz.
    pub f_dm: f64,
    /// Ratio of galactic to virial velocity.
    pub eta: f64,
    /// Field amplitude in fractional frequency units.
    pub phi0: f64,
    pub convention: LineshapeConvention,
}

impl DmParameters {
    pub fn new(f_dm: f64, phi0: f64) -> Result<Self> {
        let p = DmParameters {
            f_dm,
            eta: 1.0,
            phi0,
            convention: LineshapeConvention::AsWritten,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.f_dm > 0.0 && self.f_dm.is_finite()) {
            return Err(Error::param("f_DM", format!("must be positive, got {}", self.f_dm)));
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::param("eta", format!("must be positive, got {}", self.eta)));
        }
        if !(self.phi0 >= 0.0 && self.phi0.is_finite()) {
            return Err(Error::param("Phi_0", format!("must be non-negative, got {}", self.phi0)));
        }
        Ok(())
    }

    /// `τ_c = 10⁶ / f_DM`.
    pub fn coherence_time(&self) -> f64 {
        COHERENCE_PERIODS / self.f_dm
    }

    pub fn synthesis_step(&self) -> f64 {
        DM_STEP_PERIODS / self.f_dm
    }

    /// `F(ω)`.
    pub fn lineshape(&self, omega: f64) -> f64 {
        let tau_c = self.coherence_time();
        let x = (omega - 2.0 * PI * self.f_dm) * tau_c;
        self.lineshape_scaled(x) * tau_c
    }

    /// `F / τ_c` as a function of `x = (ω − 2π f_DM) τ_c`.
    fn lineshape_scaled(&self, x: f64) -> f64 {
        if self.convention == LineshapeConvention::OneSided && x < 0.0 {
            return 0.0;
        }
        let eta = self.eta;
        let arg = eta * eta + 2.0 * x;
        if arg < 0.0 {
            return 0.0;
        }
        let u = arg.sqrt();
        // e^{-η²} e^{-x} sinh(ηu) = ½ e^{-(u-η)²/2} (1 - e^{-2ηu})
        let gauss = (-0.5 * (u - eta) * (u - eta)).exp();
        let sh = -(-2.0 * eta * u).exp_m1();
        (2.0 * PI).powf(-0.5) / eta * 0.5 * gauss * sh
    }

    /// `F` at frequency offset `delta` (Hz) from `f_DM`.
    pub fn lineshape_at_offset(&self, delta: f64) -> f64 {
        let tau_c = self.coherence_time();
        self.lineshape_scaled(2.0 * PI * delta * tau_c) * tau_c
    }

    /// Offsets (Hz) from `f_DM` outside which `F` is zero or negligible.
    pub fn support(&self) -> (f64, f64) {
        let tau_c = self.coherence_time();
        let eta = self.eta;
        let x_lo = match self.convention {
            LineshapeConvention::AsWritten => -0.5 * eta * eta,
            LineshapeConvention::OneSided => 0.0,
        };
        let u_hi = eta + SUPPORT_SIGMAS;
        let x_hi = 0.5 * (u_hi * u_hi - eta * eta);
        (x_lo / (2.0 * PI * tau_c), x_hi / (2.0 * PI * tau_c))
    }
}

/// DFT grid used to synthesize one field realization.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthesisGrid {
    pub dt: f64,
    pub n_f: u64,
    /// Bin index of `f_DM`.
    pub carrier_bin: u64,
    /// First and last line bins, as offsets from `carrier_bin`.
    pub k_lo: i64,
    pub k_hi: i64,
}

impl SynthesisGrid {
    /// Grid with `points_on_line` bins across the line support and a period
    /// covering at least `t_m`.
    pub fn for_line(params: &DmParameters, t_m: f64, points_on_line: usize) -> Result<Self> {
        params.validate()?;
        if points_on_line < 2 {
            return Err(Error::param("points_on_line", "need at least two bins on the line"));
        }
        let dt = params.synthesis_step();
        let (lo, hi) = params.support();
        let bin = (hi - lo) / points_on_line as f64;
        let raw = (1.0 / (bin * dt)).ceil() as u64;
        // f_DM = 0.1 / dt sits on a bin when N_f is a multiple of ten
        let n_f = raw.div_ceil(10) * 10;
        let bin = 1.0 / (n_f as f64 * dt);
        let grid = SynthesisGrid {
            dt,
            n_f,
            carrier_bin: n_f / 10,
            k_lo: (lo / bin).floor() as i64,
            k_hi: (hi / bin).ceil() as i64,
        };
        if grid.period() < t_m {
            return Err(Error::SynthesisPeriod {
                period: grid.period(),
                t_m,
            });
        }
        Ok(grid)
    }

    pub fn period(&self) -> f64 {
        self.n_f as f64 * self.dt
    }

    pub fn bin_width(&self) -> f64 {
        1.0 / self.period()
    }

    pub fn carrier(&self) -> f64 {
        self.carrier_bin as f64 * self.bin_width()
    }

    pub fn line_bins(&self) -> usize {
        (self.k_hi - self.k_lo + 1) as usize
    }
}

/// Non-zero DFT coefficients `φ̃_p` of a real time series, for the consecutive
/// bins `carrier_bin + k_lo ..= carrier_bin + k_hi` (below Nyquist). The
/// remaining positive-frequency bins are zero and the negative-frequency
/// half is the complex conjugate.
#[derive(Clone, Debug)]
pub struct LineSpectrum {
    pub grid: SynthesisGrid,
    pub coeffs: Vec<Complex64>,
}

impl LineSpectrum {
    pub fn new(grid: SynthesisGrid, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != grid.line_bins() {
            return Err(Error::GridMismatch {
                left: coeffs.len(),
                right: grid.line_bins(),
            });
        }
        let first = grid.carrier_bin as i64 + grid.k_lo;
        let last = grid.carrier_bin as i64 + grid.k_hi;
        if first <= 0 || 2 * last >= grid.n_f as i64 {
            return Err(Error::param("k_lo", "line bins must lie strictly between DC and Nyquist"));
        }
        Ok(LineSpectrum { grid, coeffs })
    }

    /// Expected `⟨|φ̃_p|²⟩ = (π N_f / dt) Φ₀² F(ω_p)` on the line bins.
    pub fn target_power(params: &DmParameters, grid: &SynthesisGrid) -> Vec<f64> {
        let scale = PI * grid.n_f as f64 / grid.dt * params.phi0 * params.phi0;
        (grid.k_lo..=grid.k_hi)
            .map(|k| {
                let f = (grid.carrier_bin as i64 + k) as f64 * grid.bin_width();
                scale * params.lineshape(2.0 * PI * f)
            })
            .collect()
    }

    /// Draws coefficients with exponentially distributed power of the target mean
    /// and uniform phase (circular complex Gaussian).
    pub fn synthesize<R: Rng + ?Sized>(params: &DmParameters, grid: SynthesisGrid, rng: &mut R) -> Result<Self> {
        let coeffs = Self::target_power(params, &grid)
            .into_iter()
            .map(|mean| {
                let s = (0.5 * mean).sqrt();
                let re: f64 = StandardNormal.sample(rng);
                let im: f64 = StandardNormal.sample(rng);
                Complex64::new(s * re, s * im)
            })
            .collect();
        Self::new(grid, coeffs)
    }

    fn offset_frequency(&self, idx: usize) -> f64 {
        (self.grid.k_lo + idx as i64) as f64 * self.grid.bin_width()
    }

    /// Complex envelope `A(t)` relative to the carrier.
    pub fn envelope(&self, t: f64) -> Complex64 {
        let norm = 2.0 / self.grid.n_f as f64;
        self.coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| c * Complex64::from_polar(norm, 2.0 * PI * self.offset_frequency(i) * t))
            .sum()
    }

    /// Envelope averaged over windows of length `width` centred at
    /// `first + j step`, `j = 0 .. count`.
    pub fn windowed_envelope(&self, first: f64, step: f64, count: usize, width: f64) -> Vec<Complex64> {
        let norm = 2.0 / self.grid.n_f as f64;
        let mut out = vec![Complex64::new(0.0, 0.0); count];
        for (i, c) in self.coeffs.iter().enumerate() {
            let df = self.offset_frequency(i);
            let mut z = c * Complex64::from_polar(norm * sinc(df * width), 2.0 * PI * df * first);
            let rot = Complex64::from_polar(1.0, 2.0 * PI * df * step);
            for slot in out.iter_mut() {
                *slot += z;
                z *= rot;
            }
        }
        out
    }

    /// Real series value at grid index `j` via the sparse sum.
    pub fn value_at_index(&self, j: u64) -> f64 {
        let n = self.grid.n_f;
        let norm = 2.0 / n as f64;
        let base = self.grid.carrier_bin as i64 + self.grid.k_lo;
        self.coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let p = (base + i as i64) as u64;
                let phase = 2.0 * PI * ((j % n) * p % n) as f64 / n as f64;
                (c * Complex64::from_polar(norm, phase)).re
            })
            .sum()
    }

    /// Full real time series of length `N_f` by inverse FFT of the
    /// Hermitian-completed spectrum. Only for small grids.
    pub fn dense_series(&self) -> Result<Vec<f64>> {
        let n = self.grid.n_f;
        if n > MAX_DENSE_LEN {
            return Err(Error::param("N_f", format!("{n} points is too many for a dense series")));
        }
        let n = n as usize;
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        let base = (self.grid.carrier_bin as i64 + self.grid.k_lo) as usize;
        for (i, c) in self.coeffs.iter().enumerate() {
            buf[base + i] = *c;
            buf[n - base - i] = c.conj();
        }
        FftPlanner::new().plan_fft_inverse(n).process(&mut buf);
        Ok(buf.iter().map(|z| z.re / n as f64).collect())
    }

    /// `m` samples of the envelope over one full period (`m ≥` line bins).
    pub fn envelope_series(&self, m: usize) -> Result<Vec<Complex64>> {
        if m < self.coeffs.len() {
            return Err(Error::param("m", "need at least one sample per line bin"));
        }
        let norm = 2.0 / self.grid.n_f as f64;
        let mut buf = vec![Complex64::new(0.0, 0.0); m];
        for (i, c) in self.coeffs.iter().enumerate() {
            let k = self.grid.k_lo + i as i64;
            buf[k.rem_euclid(m as i64) as usize] += c * norm;
        }
        FftPlanner::new().plan_fft_inverse(m).process(&mut buf);
        Ok(buf)
    }

    /// Periodogram `|φ̃_p|²` on the line bins, recovered from a full-period
    /// envelope series by forward FFT.
    pub fn periodogram_from_series(&self, series: &[Complex64]) -> Vec<f64> {
        let m = series.len();
        let mut buf = series.to_vec();
        FftPlanner::new().plan_fft_forward(m).process(&mut buf);
        let scale = self.grid.n_f as f64 / (2.0 * m as f64);
        (self.grid.k_lo..=self.grid.k_hi)
            .map(|k| (buf[k.rem_euclid(m as i64) as usize] * scale).norm_sqr())
            .collect()
    }

    /// Mean square of the real series over one period, `½ ⟨|A|²⟩`.
    pub fn mean_square(&self) -> f64 {
        let n = self.grid.n_f as f64;
        2.0 * self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>() / (n * n)
    }
}

/// Amplitude (fractional) and phase of the field during one probe.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeSignal {
    pub nu: f64,
    pub theta: f64,
}

/// One realization of the field, reduced to per-probe amplitude and phase for
/// probes of duration `t_p` tiling `[0, N_p t_p]`.
#[derive(Clone, Debug)]
pub struct DmRealization {
    pub f_dm: f64,
    pub dt: f64,
    pub n_f: u64,
    pub t_p: f64,
    pub probes: Vec<ProbeSignal>,
}

impl DmRealization {
    /// A pure tone of fixed amplitude and phase.
    pub fn deterministic(f_dm: f64, n_probes: usize, t_p: f64, nu: f64, theta: f64) -> Self {
        DmRealization {
            f_dm,
            dt: DM_STEP_PERIODS / f_dm,
            n_f: 0,
            t_p,
            probes: vec![ProbeSignal { nu, theta }; n_probes],
        }
    }

    pub fn from_spectrum(spectrum: &LineSpectrum, f_dm: f64, n_probes: usize, t_p: f64) -> Self {
        let env = spectrum.windowed_envelope(0.5 * t_p, t_p, n_probes, t_p);
        DmRealization {
            f_dm,
            dt: spectrum.grid.dt,
            n_f: spectrum.grid.n_f,
            t_p,
            probes: env
                .into_iter()
                .map(|a| ProbeSignal {
                    nu: a.norm(),
                    theta: a.arg(),
                })
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.probes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probes.is_empty()
    }

    /// CSV trace: commented header with `f_DM, dt, N_f, seed`, then one row per probe.
    pub fn write_csv<W: Write>(&self, mut w: W, seed: u64) -> std::io::Result<()> {
        writeln!(w, "# f_dm={:e} dt={:e} n_f={} seed={}", self.f_dm, self.dt, self.n_f, seed)?;
        writeln!(w, "j,t_j,nu_s,theta")?;
        for (j, p) in self.probes.iter().enumerate() {
            let t = (j as f64 + 0.5) * self.t_p;
            writeln!(w, "{j},{t:e},{:e},{:e}", p.nu, p.theta)?;
        }
        Ok(())
    }
}

/// Synthesizes a field realization and extracts `(ν_S,j, θ_j)` for
/// `floor(T_m / T_p)` probes.
pub fn synthesize_realization<R: Rng + ?Sized>(
    params: &DmParameters,
    t_m: f64,
    t_p: f64,
    points_on_line: usize,
    rng: &mut R,
) -> Result<DmRealization> {
    if !(t_p > 0.0 && t_m >= t_p) {
        return Err(Error::param("T_p", format!("need 0 < T_p <= T_m, got T_p={t_p}, T_m={t_m}")));
    }
    let grid = SynthesisGrid::for_line(params, t_m, points_on_line)?;
    let spectrum = LineSpectrum::synthesize(params, grid, rng)?;
    let n_probes = (t_m / t_p).floor() as usize;
    Ok(DmRealization::from_spectrum(&spectrum, params.f_dm, n_probes, t_p))
}

/// Signal phase `2π ν₀ ν_S,j [g_I(f) cos θ_j − g_Q(f) sin θ_j]` of one probe.
pub fn probe_signal_phase(seq: &PulseSequence, signal: ProbeSignal, f: f64, clock_frequency: f64) -> f64 {
    let q = seq.quadrature_components(f);
    2.0 * PI * clock_frequency * signal.nu * (q.g_i * signal.theta.cos() - q.g_q * signal.theta.sin())
}

/// Ensemble statistics of synthesized field realizations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DmValidation {
    pub f_dm: f64,
    pub phi0: f64,
    pub n_f: u64,
    pub realizations: usize,
    /// Offset from `f_DM` (Hz), target `⟨|φ̃_p|²⟩` and ensemble mean periodogram,
    /// for the bins of highest target power.
    pub top_bins: Vec<(f64, f64, f64)>,
    /// Time-domain mean square averaged over realizations.
    pub mean_square: f64,
}

impl DmValidation {
    pub fn worst_bin_error(&self) -> f64 {
        self.top_bins
            .iter()
            .map(|(_, target, got)| (got / target - 1.0).abs())
            .fold(0.0, f64::max)
    }

    pub fn mean_square_error(&self) -> f64 {
        (self.mean_square / (0.5 * self.phi0 * self.phi0) - 1.0).abs()
    }
}

/// Synthesizes `realizations` fields and compares the ensemble periodogram
/// with `(π N_f / dt) Φ₀² F(ω_p)` at the `top` strongest bins, and the mean
/// square of the sampled time series with `Φ₀² / 2`.
pub fn validate_field<R: Rng + ?Sized>(
    params: &DmParameters,
    points_on_line: usize,
    realizations: usize,
    top: usize,
    rng: &mut R,
) -> Result<DmValidation> {
    if realizations == 0 {
        return Err(Error::param("realizations", "need at least one"));
    }
    let grid = SynthesisGrid::for_line(params, 0.0, points_on_line)?;
    let target = LineSpectrum::target_power(params, &grid);
    let m = (2 * grid.line_bins()).next_power_of_two();
    let mut periodogram = vec![0.0; target.len()];
    let mut mean_square = 0.0;
    for _ in 0..realizations {
        let s = LineSpectrum::synthesize(params, grid, rng)?;
        let series = s.envelope_series(m)?;
        mean_square += 0.5 * series.iter().map(|a| a.norm_sqr()).sum::<f64>() / m as f64;
        for (acc, p) in periodogram.iter_mut().zip(s.periodogram_from_series(&series)) {
            *acc += p;
        }
    }
    let n = realizations as f64;
    let mut order: Vec<usize> = (0..target.len()).collect();
    order.sort_by(|&a, &b| target[b].total_cmp(&target[a]));
    let top_bins = order
        .into_iter()
        .take(top)
        .map(|i| {
            let offset = (grid.k_lo + i as i64) as f64 * grid.bin_width();
            (offset, target[i], periodogram[i] / n)
        })
        .collect();
    Ok(DmValidation {
        f_dm: params.f_dm,
        phi0: params.phi0,
        n_f: grid.n_f,
        realizations,
        top_bins,
        mean_square: mean_square / n,
    })
}
