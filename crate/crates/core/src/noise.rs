// Copyright 2026 The clockdm Authors
// SPDX-License-Identifier: Apache-2.0

//! Laser frequency noise and quantum projection noise.
//!
//! Flicker (1/f) laser noise comes from a Mandelbrot state-space model: `m`
//! first-order low-pass states with geometrically spaced corner frequencies,
//! each driven by its own standard normal input, summed through an output
//! vector `C`. The output is calibrated to an Allan deviation of one and then
//! rescaled by `f₀ σ_LN` to a detuning in hertz.
//!
//! Differential spectroscopy does not see the cavity noise; its effective
//! laser noise is the projection noise of the reference lattice clock, modelled
//! as white frequency noise at the standard quantum limit.

use std::f64::consts::{LN_2, PI};

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sequence::{PulseSequence, SampledTrace, StepTrace};
use crate::units;

/// Parameters of the Mandelbrot power-law noise generator.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MandelbrotConfig {
    /// Number of states.
    pub size: usize,
    /// Spectral exponent (−1 for flicker).
    pub lambda: f64,
    pub f_min: f64,
    pub f_max: f64,
    /// Time step, s.
    #[serde(skip)]
    pub dt: f64,
}

impl Default for MandelbrotConfig {
    fn default() -> Self {
        MandelbrotConfig {
            size: 10,
            lambda: -1.0,
            f_min: 1e-6,
            f_max: 1e3,
            dt: 1e-3,
        }
    }
}

/// Averaging time at which the generator output is calibrated to unit Allan deviation.
pub const CALIBRATION_TAU: f64 = 10.0;

/// Mandelbrot state-space model `z ← A z + B ∘ r`, output `C · z`.
#[derive(Clone, Debug)]
pub struct MandelbrotModel {
    config: MandelbrotConfig,
    alpha: f64,
    beta: f64,
    tau: f64,
    /// Diagonal of the transition matrix.
    a: Vec<f64>,
    /// `1 - a`, kept separately for precision.
    one_minus_a: Vec<f64>,
    b: Vec<f64>,
    c: Vec<f64>,
    z: Vec<f64>,
    calibration: f64,
}

impl MandelbrotModel {
    pub fn new(config: MandelbrotConfig) -> Result<Self> {
        let MandelbrotConfig {
            size,
            lambda,
            f_min,
            f_max,
            dt,
        } = config;
        if size < 1 {
            return Err(Error::param("m", "model size must be at least 1"));
        }
        if !(f_min > 0.0 && f_max > f_min && f_max.is_finite()) {
            return Err(Error::param(
                "f_max",
                format!("need 0 < f_Min < f_Max, got f_Min={f_min}, f_Max={f_max}"),
            ));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::param("dt", format!("must be positive, got {dt}")));
        }
        if !lambda.is_finite() || lambda >= 0.0 {
            return Err(Error::param("lambda", format!("must be negative, got {lambda}")));
        }

        let s0 = 1.0 / (2.0 * LN_2).sqrt();
        let tau = 1.0 / (2.0 * PI * f_min);
        let beta = (10.0 * f_max / f_min).powf(1.0 / size as f64);
        let alpha = beta.powf(-lambda / 2.0);

        let mut a = Vec::with_capacity(size);
        let mut one_minus_a = Vec::with_capacity(size);
        let mut b = Vec::with_capacity(size);
        let mut c = Vec::with_capacity(size);
        let prefactor = s0 / 2f64.sqrt()
            * alpha.powf((6.0 - lambda) / 8.0)
            * (f_min * dt).powf(lambda / 2.0);
        for i in 0..size {
            let bi = beta.powi(i as i32);
            let eps = bi * dt / (alpha * tau);
            let q = -(-eps).exp_m1();
            a.push((-eps).exp());
            one_minus_a.push(q);
            b.push(q / bi);
            let residue: f64 = (0..size)
                .filter(|&j| j != i)
                .map(|j| {
                    let bj = beta.powi(j as i32);
                    (alpha * bj - bi) / (bj - bi)
                })
                .product();
            c.push(prefactor * (alpha - 1.0) * bi / alpha.powi(size as i32) * residue);
        }

        let mut model = MandelbrotModel {
            config,
            alpha,
            beta,
            tau,
            a,
            one_minus_a,
            b,
            c,
            z: vec![0.0; size],
            calibration: 1.0,
        };
        let tau_ref = CALIBRATION_TAU.max(dt);
        let adev = model.analytic_avar(tau_ref).sqrt();
        model.calibration = 1.0 / adev;
        for ci in &mut model.c {
            *ci *= model.calibration;
        }
        log::debug!(
            "mandelbrot m={size} dt={dt}: output scale calibrated by {:.6}",
            model.calibration
        );
        Ok(model)
    }

    pub fn config(&self) -> &MandelbrotConfig {
        &self.config
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn transition(&self) -> &[f64] {
        &self.a
    }

    pub fn input(&self) -> &[f64] {
        &self.b
    }

    pub fn output(&self) -> &[f64] {
        &self.c
    }

    pub fn state(&self) -> &[f64] {
        &self.z
    }

    /// Factor applied to the printed `C` to bring the Allan deviation to one.
    pub fn calibration(&self) -> f64 {
        self.calibration
    }

    pub fn reset(&mut self) {
        self.z.iter_mut().for_each(|z| *z = 0.0);
    }

    /// Advances the state with the given input vector and returns `C · z`.
    pub fn step_with(&mut self, r: &[f64]) -> f64 {
        let mut out = 0.0;
        for (((z, a), b), (c, r)) in self.z.iter_mut().zip(&self.a).zip(&self.b).zip(self.c.iter().zip(r)) {
            *z = a * *z + b * r;
            out += c * *z;
        }
        out
    }

    /// Advances the state with fresh standard normal inputs.
    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> f64 {
        let mut out = 0.0;
        for i in 0..self.z.len() {
            let r: f64 = StandardNormal.sample(rng);
            self.z[i] = self.a[i] * self.z[i] + self.b[i] * r;
            out += self.c[i] * self.z[i];
        }
        out
    }

    /// One-sided power spectral density of the output at frequency `f` (1/Hz).
    pub fn psd(&self, f: f64) -> f64 {
        let dt = self.config.dt;
        let s = (PI * f * dt).sin();
        let mut acc = 0.0;
        for i in 0..self.a.len() {
            let q = self.one_minus_a[i];
            let den = q * q + 4.0 * self.a[i] * s * s;
            let g = self.c[i] * self.b[i];
            acc += g * g / den;
        }
        2.0 * dt * acc
    }

    /// Allan variance of the stationary output at averaging time `tau`
    /// (rounded to a whole number of steps), from the exact discrete spectrum.
    pub fn analytic_avar(&self, tau: f64) -> f64 {
        let dt = self.config.dt;
        let n = (tau / dt).round().max(1.0);
        let tau = n * dt;
        let nyquist = 0.5 / dt;
        let lowest = self.config.f_min / self.alpha;
        let f_lo = 1e-4 * lowest.min(1.0 / tau);
        let f_switch = (20.0 / tau).min(nyquist);

        let kernel = |f: f64| {
            let num = (PI * f * tau).sin().powi(4);
            let den = n * n * (PI * f * dt).sin().powi(2);
            2.0 * num / den
        };
        let mut total = simpson_log(|f| self.psd(f) * kernel(f), f_lo, f_switch, 40_000);
        if f_switch < nyquist {
            // sin⁴ averages to 3/8 above many oscillations
            let smooth = |f: f64| 0.75 * self.psd(f) / (n * n * (PI * f * dt).sin().powi(2));
            total += simpson_log(smooth, f_switch, nyquist * (1.0 - 1e-9), 4_000);
        }
        total
    }
}

/// Simpson's rule for `∫ g(f) df` on a logarithmic grid.
fn simpson_log(g: impl Fn(f64) -> f64, lo: f64, hi: f64, intervals: usize) -> f64 {
    if hi <= lo {
        return 0.0;
    }
    let n = intervals + intervals % 2;
    let (ul, uh) = (lo.ln(), hi.ln());
    let h = (uh - ul) / n as f64;
    let mut acc = 0.0;
    for k in 0..=n {
        let u = ul + k as f64 * h;
        let f = u.exp();
        let w = if k == 0 || k == n {
            1.0
        } else if k % 2 == 1 {
            4.0
        } else {
            2.0
        };
        acc += w * g(f) * f;
    }
    acc * h / 3.0
}

/// Effective laser noise model for a campaign.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "kebab-case")]
pub enum LaserNoise {
    /// Flicker noise with the given fractional Allan deviation.
    Flicker {
        sigma_ln: f64,
        #[serde(default)]
        mandelbrot: MandelbrotConfig,
    },
    /// White noise of the reference lattice clock at the standard quantum limit.
    LatticeWhite {
        #[serde(default = "default_atoms")]
        n_atoms: f64,
        /// Lattice probe time, s.
        #[serde(default = "default_lattice_probe")]
        t_probe: f64,
        /// Overrides the computed SQL instability at `t_probe`.
        #[serde(default)]
        sigma_sql: Option<f64>,
    },
    /// No laser noise (projection noise only).
    None,
}

fn default_atoms() -> f64 {
    1000.0
}

fn default_lattice_probe() -> f64 {
    1.0
}

impl LaserNoise {
    pub fn flicker(sigma_ln: f64) -> Self {
        LaserNoise::Flicker {
            sigma_ln,
            mandelbrot: MandelbrotConfig::default(),
        }
    }

    pub fn lattice_default() -> Self {
        LaserNoise::LatticeWhite {
            n_atoms: default_atoms(),
            t_probe: default_lattice_probe(),
            sigma_sql: None,
        }
    }

    /// Fractional Allan deviation level reported with results.
    pub fn sigma(&self) -> f64 {
        match *self {
            LaserNoise::Flicker { sigma_ln, .. } => sigma_ln,
            LaserNoise::LatticeWhite {
                n_atoms,
                t_probe,
                sigma_sql,
            } => sigma_sql.unwrap_or_else(|| sql_instability(n_atoms, t_probe)),
            LaserNoise::None => 0.0,
        }
    }

    // negated comparisons also reject NaN
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<()> {
        match *self {
            LaserNoise::Flicker { sigma_ln, mandelbrot } => {
                if !(sigma_ln > 0.0 && sigma_ln.is_finite()) {
                    return Err(Error::param("sigma_ln", format!("must be positive, got {sigma_ln}")));
                }
                MandelbrotModel::new(mandelbrot).map(|_| ())
            }
            LaserNoise::LatticeWhite {
                n_atoms,
                t_probe,
                sigma_sql,
            } => {
                if !(n_atoms > 0.0) || !(t_probe > 0.0) {
                    return Err(Error::param("n_atoms", "atom number and probe time must be positive"));
                }
                if let Some(s) = sigma_sql {
                    if !(s >= 0.0) {
                        return Err(Error::param("sigma_sql", "must be non-negative"));
                    }
                }
                Ok(())
            }
            LaserNoise::None => Ok(()),
        }
    }
}

/// Standard quantum limit `1 / (2π ν_Sr T_p √N)` of the strontium lattice clock
/// at averaging time `T_p`.
pub fn sql_instability(n_atoms: f64, t_probe: f64) -> f64 {
    1.0 / (2.0 * PI * units::STRONTIUM_CLOCK_HZ * t_probe * n_atoms.sqrt())
}

/// White fractional frequency offsets, one per lattice probe interval, with
/// Allan deviation `σ_SQL √(T_p / τ)`.
pub fn ds_effective_noise<R: Rng + ?Sized>(
    n_atoms: f64,
    t_probe: f64,
    intervals: usize,
    rng: &mut R,
) -> Vec<f64> {
    let sigma = sql_instability(n_atoms, t_probe);
    (0..intervals)
        .map(|_| {
            let r: f64 = StandardNormal.sample(rng);
            sigma * r
        })
        .collect()
}

/// Projection noise phase: ±1 rad with equal probability.
pub fn qpn_phase<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    if rng.random::<bool>() {
        1.0
    } else {
        -1.0
    }
}

/// Laser-noise phase of one probe over a sampled detuning trace (Hz), plus an
/// independent projection-noise phase.
pub fn probe_noise_phase<R: Rng + ?Sized>(
    seq: &PulseSequence,
    trace: &SampledTrace<'_>,
    rng: &mut R,
) -> Result<(f64, f64)> {
    let phi_ln = seq.accumulate_phase(trace)?;
    Ok((phi_ln, qpn_phase(rng)))
}

/// Samples indexed from zero and generated on demand in order; windows must
/// move forward in time.
#[derive(Clone, Debug, Default)]
struct SampleBuffer {
    start: usize,
    values: Vec<f64>,
}

impl SampleBuffer {
    fn window(&mut self, lo: usize, hi: usize, mut next: impl FnMut() -> f64) -> &[f64] {
        debug_assert!(lo >= self.start, "windows must move forward");
        let drop = lo.saturating_sub(self.start).min(self.values.len());
        if drop > 0 {
            self.values.drain(..drop);
            self.start += drop;
        }
        while self.start + self.values.len() <= hi {
            self.values.push(next());
        }
        &self.values[lo - self.start..=hi - self.start]
    }
}

/// Streams a laser-noise detuning trace (Hz) probe by probe.
#[derive(Clone, Debug)]
pub struct NoiseStream {
    kind: StreamKind,
}

#[derive(Clone, Debug)]
enum StreamKind {
    Flicker {
        model: MandelbrotModel,
        /// `f₀ σ_LN`, Hz.
        scale: f64,
        buffer: SampleBuffer,
    },
    Lattice {
        sigma: f64,
        /// Lattice interval, s.
        width: f64,
        /// `f₀` scale to Hz.
        scale: f64,
        buffer: SampleBuffer,
    },
    Silent,
}

impl NoiseStream {
    /// `dt` is the sampling step used for flicker noise.
    pub fn new(noise: &LaserNoise, clock_frequency: f64, dt: f64) -> Result<Self> {
        let kind = match *noise {
            LaserNoise::Flicker { sigma_ln, mandelbrot } => StreamKind::Flicker {
                model: MandelbrotModel::new(MandelbrotConfig { dt, ..mandelbrot })?,
                scale: clock_frequency * sigma_ln,
                buffer: SampleBuffer::default(),
            },
            LaserNoise::LatticeWhite { t_probe, .. } => StreamKind::Lattice {
                sigma: noise.sigma(),
                width: t_probe,
                scale: clock_frequency,
                buffer: SampleBuffer::default(),
            },
            LaserNoise::None => StreamKind::Silent,
        };
        Ok(NoiseStream { kind })
    }

    /// Laser-noise phase of `seq`. Sequences must be supplied in time order and
    /// start at `t ≥ 0`.
    pub fn probe_phase<R: Rng + ?Sized>(&mut self, seq: &PulseSequence, rng: &mut R) -> Result<f64> {
        let (a, b) = (seq.start().max(0.0), seq.end());
        match &mut self.kind {
            StreamKind::Flicker { model, scale, buffer } => {
                let dt = model.config().dt;
                let lo = (a / dt).floor() as usize;
                let hi = ((b / dt).ceil() as usize).max(lo + 1);
                let s = *scale;
                let values = buffer.window(lo, hi, || s * model.step(rng));
                seq.accumulate_phase(&SampledTrace::new(lo as f64 * dt, dt, values))
            }
            StreamKind::Lattice {
                sigma,
                width,
                scale,
                buffer,
            } => {
                let w = *width;
                let lo = (a / w).floor() as usize;
                let hi = ((b / w).ceil() as usize).saturating_sub(1).max(lo);
                let amp = *sigma * *scale;
                let values = buffer.window(lo, hi, || {
                    let r: f64 = StandardNormal.sample(rng);
                    amp * r
                });
                seq.accumulate_phase_stepwise(&StepTrace {
                    t0: lo as f64 * w,
                    width: w,
                    values,
                })
            }
            StreamKind::Silent => Ok(0.0),
        }
    }
}

/// Allan deviations and PSD slope of the rescaled flicker generator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlickerValidation {
    pub sigma_ln: f64,
    /// `(τ, σ_y(τ))`, from the Allan variance averaged over realizations.
    pub adev: Vec<(f64, f64)>,
    pub psd_slope: f64,
    /// Frequency band of the slope fit, Hz.
    pub slope_band: (f64, f64),
    pub realizations: usize,
}

impl FlickerValidation {
    /// Largest `|σ_y(τ) / σ_LN − 1|`.
    pub fn worst_adev_error(&self) -> f64 {
        self.adev
            .iter()
            .map(|(_, a)| (a / self.sigma_ln - 1.0).abs())
            .fold(0.0, f64::max)
    }

    pub fn passed(&self, adev_tolerance: f64, slope_tolerance: f64) -> bool {
        self.worst_adev_error() < adev_tolerance && (self.psd_slope + 1.0).abs() <= slope_tolerance
    }
}

/// Generates `realizations` series of `steps` fractional-frequency samples at
/// step `dt`, each from its own stream of `seed`, and measures the overlapping
/// Allan deviation at `taus` and the log-log slope of the Hann-windowed
/// periodogram between `20 / (steps dt)` and `0.1 / dt`.
pub fn validate_flicker(
    sigma_ln: f64,
    dt: f64,
    steps: usize,
    realizations: usize,
    taus: &[f64],
    seed: u64,
) -> Result<FlickerValidation> {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rustfft::num_complex::Complex64;
    use rustfft::FftPlanner;

    if realizations == 0 {
        return Err(Error::param("realizations", "need at least one"));
    }
    let template = MandelbrotModel::new(MandelbrotConfig {
        dt,
        ..MandelbrotConfig::default()
    })?;
    let factors: Vec<usize> = taus.iter().map(|t| (t / dt).round() as usize).collect();
    if let Some(t) = taus.iter().zip(&factors).find(|(_, n)| 2 * **n > steps).map(|(t, _)| t) {
        return Err(Error::param("steps", format!("series too short for τ = {t} s")));
    }
    let fft = FftPlanner::new().plan_fft_forward(steps);
    let window: Vec<f64> = (0..steps)
        .map(|k| 0.5 - 0.5 * (2.0 * PI * k as f64 / steps as f64).cos())
        .collect();
    let mut avar = vec![0.0; taus.len()];
    let mut power = vec![0.0; steps / 2];
    for r in 0..realizations {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(r as u64);
        let mut model = template.clone();
        let y: Vec<f64> = (0..steps).map(|_| sigma_ln * model.step(&mut rng)).collect();
        for (acc, &n) in avar.iter_mut().zip(&factors) {
            *acc += crate::allan::overlapping_avar(&y, dt, n).unwrap_or(0.0);
        }
        let mut buf: Vec<Complex64> = y.iter().zip(&window).map(|(v, w)| Complex64::new(v * w, 0.0)).collect();
        fft.process(&mut buf);
        for (p, z) in power.iter_mut().zip(&buf) {
            *p += z.norm_sqr();
        }
    }
    let adev = taus
        .iter()
        .zip(avar)
        .map(|(&t, v)| (t, (v / realizations as f64).sqrt()))
        .collect();

    // average the periodogram in logarithmic bins so each decade weighs the same
    let df = 1.0 / (steps as f64 * dt);
    let band = (20.0 * df, 0.1 / dt);
    let bins = 24;
    let ratio = (band.1 / band.0).ln();
    let mut sums = vec![(0.0, 0.0, 0usize); bins];
    for (k, p) in power.iter().enumerate().skip(1) {
        let f = k as f64 * df;
        if f < band.0 || f >= band.1 {
            continue;
        }
        let b = (((f / band.0).ln() / ratio) * bins as f64) as usize;
        let e = &mut sums[b.min(bins - 1)];
        e.0 += f;
        e.1 += p;
        e.2 += 1;
    }
    let points: Vec<(f64, f64)> = sums
        .into_iter()
        .filter(|e| e.2 > 0)
        .map(|(f, p, n)| (f / n as f64, p / n as f64))
        .collect();
    Ok(FlickerValidation {
        sigma_ln,
        adev,
        psd_slope: crate::allan::log_log_slope(&points),
        slope_band: band,
        realizations,
    })
}
