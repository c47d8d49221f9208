// Copyright 2026 The clockdm Authors
// SPDX-License-Identifier: Apache-2.0

//! Pulse sequences and their sensitivity functions.
//!
//! A probe is a Ramsey sequence of duration `T_p` centred on `t_j`, optionally
//! with instantaneous π pulses inside it. The sensitivity function `g(t)` starts
//! at `+1` and changes sign at every π pulse, so a sequence is fully described
//! by its π-pulse times. Differential spectroscopy uses plain Ramsey probes,
//! narrowband dynamical decoupling regularly spaced pulses (CPMG placement) and
//! broadband dynamical decoupling pulses at Poisson-distributed times.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Exp};
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Normalized sinc, `sin(πx) / (πx)`.
pub fn sinc(x: f64) -> f64 {
    let px = PI * x;
    if px.abs() < 1e-4 {
        let p2 = px * px;
        1.0 - p2 / 6.0 + p2 * p2 / 120.0
    } else {
        px.sin() / px
    }
}

/// Measurement protocol.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    /// Differential spectroscopy: plain Ramsey probes.
    #[serde(alias = "ramsey")]
    Ds,
    /// Narrowband dynamical decoupling (CPMG with a random rate per probe).
    Nbdd,
    /// Broadband dynamical decoupling (π pulses at random times).
    Bbdd,
}

impl Scheme {
    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Ds => "ds",
            Scheme::Nbdd => "nbdd",
            Scheme::Bbdd => "bbdd",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ds" | "ramsey" => Ok(Scheme::Ds),
            "nbdd" => Ok(Scheme::Nbdd),
            "bbdd" => Ok(Scheme::Bbdd),
            other => Err(Error::param("scheme", format!("unknown scheme `{other}`"))),
        }
    }
}

/// In-phase and quadrature components of a sequence's sensitivity function at
/// frequency `f`: `g_I = ∫ g cos(2πft) dt`, `g_Q = ∫ g sin(2πft) dt`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadratureComponents {
    pub g_i: f64,
    pub g_q: f64,
    pub frequency: f64,
}

impl QuadratureComponents {
    pub fn power(&self) -> f64 {
        self.g_i * self.g_i + self.g_q * self.g_q
    }
}

/// A single probe: centre time, duration and π-pulse times relative to the
/// start of the probe.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SequenceRecord", into = "SequenceRecord")]
pub struct PulseSequence {
    scheme: Scheme,
    center: f64,
    duration: f64,
    pi_pulse_times: Vec<f64>,
}

/// JSON form of a [`PulseSequence`].
#[derive(Clone, Debug, Serialize, Deserialize)]
struct SequenceRecord {
    scheme: Scheme,
    t_j: f64,
    #[serde(rename = "T_p")]
    t_p: f64,
    pulse_times: Vec<f64>,
}

impl TryFrom<SequenceRecord> for PulseSequence {
    type Error = Error;

    fn try_from(r: SequenceRecord) -> Result<Self> {
        PulseSequence::from_parts(r.scheme, r.t_j, r.t_p, r.pulse_times)
    }
}

impl From<PulseSequence> for SequenceRecord {
    fn from(s: PulseSequence) -> Self {
        SequenceRecord {
            scheme: s.scheme,
            t_j: s.center,
            t_p: s.duration,
            pulse_times: s.pi_pulse_times,
        }
    }
}

fn check_duration(duration: f64) -> Result<()> {
    if duration.is_finite() && duration > 0.0 {
        Ok(())
    } else {
        Err(Error::param("T_p", format!("must be positive, got {duration}")))
    }
}

impl PulseSequence {
    /// Builds a sequence from explicit π-pulse times (relative to the start).
    pub fn from_parts(
        scheme: Scheme,
        center: f64,
        duration: f64,
        pi_pulse_times: Vec<f64>,
    ) -> Result<Self> {
        check_duration(duration)?;
        if !center.is_finite() {
            return Err(Error::param("t_j", "must be finite"));
        }
        let mut prev = 0.0;
        for &t in &pi_pulse_times {
            if !(t > prev && t < duration) {
                return Err(Error::param(
                    "pulse_times",
                    format!("must be strictly increasing inside (0, {duration}), got {t}"),
                ));
            }
            prev = t;
        }
        Ok(PulseSequence {
            scheme,
            center,
            duration,
            pi_pulse_times,
        })
    }

    /// Plain Ramsey probe: `g(t) = +1` over the whole probe.
    pub fn ramsey(center: f64, duration: f64) -> Result<Self> {
        Self::from_parts(Scheme::Ds, center, duration, Vec::new())
    }

    /// CPMG probe with π pulses at `(k + ½) / f_pi`, `k = 0 .. floor(T_p f_pi)`.
    ///
    /// `g(t)` is then a square wave at `f_pi / 2`.
    pub fn nbdd(center: f64, duration: f64, f_pi: f64) -> Result<Self> {
        check_duration(duration)?;
        if !(f_pi.is_finite() && f_pi > 0.0) {
            return Err(Error::param("f_pi", format!("must be positive, got {f_pi}")));
        }
        let n = (duration * f_pi).floor() as usize;
        let times = (0..n)
            .map(|k| (k as f64 + 0.5) / f_pi)
            .filter(|&t| t > 0.0 && t < duration)
            .collect();
        Self::from_parts(Scheme::Nbdd, center, duration, times)
    }

    /// Probe with π pulses at the event times of a Poisson process of rate `rate`.
    pub fn bbdd<R: Rng + ?Sized>(center: f64, duration: f64, rate: f64, rng: &mut R) -> Result<Self> {
        check_duration(duration)?;
        if !(rate.is_finite() && rate >= 0.0) {
            return Err(Error::param("f_pi", format!("must be non-negative, got {rate}")));
        }
        let mut times = Vec::new();
        if rate > 0.0 {
            let gap = Exp::new(rate).map_err(|e| Error::param("f_pi", e.to_string()))?;
            let mut t = gap.sample(rng);
            while t < duration {
                if t > times.last().copied().unwrap_or(0.0) {
                    times.push(t);
                }
                t += gap.sample(rng);
            }
        }
        Self::from_parts(Scheme::Bbdd, center, duration, times)
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn center(&self) -> f64 {
        self.center
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    pub fn start(&self) -> f64 {
        self.center - 0.5 * self.duration
    }

    pub fn end(&self) -> f64 {
        self.center + 0.5 * self.duration
    }

    pub fn pi_pulse_times(&self) -> &[f64] {
        &self.pi_pulse_times
    }

    /// Same sequence moved to a new centre time.
    pub fn shifted_to(&self, center: f64) -> Self {
        PulseSequence {
            center,
            ..self.clone()
        }
    }

    /// Value of `g(t)`; zero outside the probe. Right-continuous at π pulses.
    pub fn sign_at(&self, t: f64) -> f64 {
        if t < self.start() || t > self.end() {
            return 0.0;
        }
        let rel = t - self.start();
        let flips = self.pi_pulse_times.partition_point(|&p| p <= rel);
        if flips.is_multiple_of(2) {
            1.0
        } else {
            -1.0
        }
    }

    /// Constant-sign pieces `(start, end, sign)` in absolute time.
    pub fn segments(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        let t0 = self.start();
        let n = self.pi_pulse_times.len();
        (0..=n).map(move |k| {
            let a = if k == 0 { t0 } else { t0 + self.pi_pulse_times[k - 1] };
            let b = if k == n { self.end() } else { t0 + self.pi_pulse_times[k] };
            let s = if k.is_multiple_of(2) { 1.0 } else { -1.0 };
            (a, b, s)
        })
    }

    /// Points where `g` jumps, with the jump size: `-1` at the start, `±2` at each
    /// π pulse, `∓1` at the end. `Σ w e^{2πifτ} = 2πif (g_I + i g_Q)`.
    pub fn boundary_weights(&self) -> Vec<(f64, f64)> {
        let t0 = self.start();
        let n = self.pi_pulse_times.len();
        let mut out = Vec::with_capacity(n + 2);
        out.push((t0, -1.0));
        for (k, &p) in self.pi_pulse_times.iter().enumerate() {
            // sign before the pulse is +1 for even k
            let w = if k.is_multiple_of(2) { 2.0 } else { -2.0 };
            out.push((t0 + p, w));
        }
        out.push((self.end(), if n.is_multiple_of(2) { 1.0 } else { -1.0 }));
        out
    }

    /// `∫ g(t) dt` over the probe.
    pub fn integral(&self) -> f64 {
        self.segments().map(|(a, b, s)| s * (b - a)).sum()
    }

    /// `g_I + i g_Q`, i.e. `∫ g(t) e^{2πift} dt`, evaluated segment by segment.
    pub fn response(&self, f: f64) -> Complex64 {
        let w = 2.0 * PI * f;
        self.segments()
            .map(|(a, b, s)| {
                let len = b - a;
                let mid = 0.5 * (a + b);
                Complex64::from_polar(s * len * sinc(f * len), w * mid)
            })
            .sum()
    }

    pub fn quadrature_components(&self, f: f64) -> QuadratureComponents {
        let r = self.response(f);
        QuadratureComponents {
            g_i: r.re,
            g_q: r.im,
            frequency: f,
        }
    }

    /// Phase `2π ∫ g(t) ν(t) dt` for a sampled detuning `ν` (Hz), integrating the
    /// linear interpolant of the samples piece by piece between sign flips.
    pub fn accumulate_phase(&self, trace: &SampledTrace<'_>) -> Result<f64> {
        trace.check_covers(self.start(), self.end())?;
        let total: f64 = self
            .segments()
            .map(|(a, b, s)| s * trace.integrate(a, b))
            .sum();
        Ok(2.0 * PI * total)
    }

    /// Phase for a piecewise-constant detuning (Hz).
    pub fn accumulate_phase_stepwise(&self, trace: &StepTrace<'_>) -> Result<f64> {
        trace.check_covers(self.start(), self.end())?;
        let total: f64 = self
            .segments()
            .map(|(a, b, s)| s * trace.integrate(a, b))
            .sum();
        Ok(2.0 * PI * total)
    }
}

const COVER_TOL: f64 = 1e-9;

/// Uniformly sampled detuning, `values[k]` at `t0 + k dt`.
#[derive(Clone, Copy, Debug)]
pub struct SampledTrace<'a> {
    pub t0: f64,
    pub dt: f64,
    pub values: &'a [f64],
}

impl<'a> SampledTrace<'a> {
    pub fn new(t0: f64, dt: f64, values: &'a [f64]) -> Self {
        SampledTrace { t0, dt, values }
    }

    pub fn end(&self) -> f64 {
        self.t0 + self.dt * (self.values.len().saturating_sub(1)) as f64
    }

    fn check_covers(&self, a: f64, b: f64) -> Result<()> {
        let tol = COVER_TOL * self.dt;
        if self.values.len() < 2 || self.t0 > a + tol || self.end() < b - tol {
            return Err(Error::GridCoverage {
                grid_start: self.t0,
                grid_end: self.end(),
                probe_start: a,
                probe_end: b,
            });
        }
        Ok(())
    }

    fn value_at(&self, t: f64, k: usize) -> f64 {
        // linear interpolation on [t_k, t_{k+1}]
        let tk = self.t0 + k as f64 * self.dt;
        let u = (t - tk) / self.dt;
        self.values[k] + u * (self.values[k + 1] - self.values[k])
    }

    /// `∫_a^b` of the piecewise-linear interpolant (trapezoid rule on the grid).
    pub fn integrate(&self, a: f64, b: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        let last = self.values.len() - 2;
        let cell = |t: f64| (((t - self.t0) / self.dt).floor().max(0.0) as usize).min(last);
        let mut k = cell(a);
        let mut t_prev = a;
        let mut v_prev = self.value_at(a, k);
        let mut acc = 0.0;
        loop {
            let t_next = self.t0 + (k + 1) as f64 * self.dt;
            if t_next >= b || k == last {
                let v_b = self.value_at(b, k);
                acc += 0.5 * (v_prev + v_b) * (b - t_prev);
                break;
            }
            let v_next = self.values[k + 1];
            acc += 0.5 * (v_prev + v_next) * (t_next - t_prev);
            t_prev = t_next;
            v_prev = v_next;
            k += 1;
        }
        acc
    }
}

/// Piecewise-constant detuning, `values[k]` on `[t0 + k w, t0 + (k+1) w)`.
#[derive(Clone, Copy, Debug)]
pub struct StepTrace<'a> {
    pub t0: f64,
    pub width: f64,
    pub values: &'a [f64],
}

impl<'a> StepTrace<'a> {
    pub fn end(&self) -> f64 {
        self.t0 + self.width * self.values.len() as f64
    }

    fn check_covers(&self, a: f64, b: f64) -> Result<()> {
        let tol = COVER_TOL * self.width;
        if self.values.is_empty() || self.t0 > a + tol || self.end() < b - tol {
            return Err(Error::GridCoverage {
                grid_start: self.t0,
                grid_end: self.end(),
                probe_start: a,
                probe_end: b,
            });
        }
        Ok(())
    }

    pub fn integrate(&self, a: f64, b: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        let n = self.values.len();
        let first = (((a - self.t0) / self.width).floor().max(0.0) as usize).min(n - 1);
        let mut acc = 0.0;
        for k in first..n {
            let lo = (self.t0 + k as f64 * self.width).max(a);
            let hi = (self.t0 + (k + 1) as f64 * self.width).min(b);
            if k == n - 1 {
                acc += self.values[k] * (b - lo);
                break;
            }
            if hi > lo {
                acc += self.values[k] * (hi - lo);
            }
            if hi >= b {
                break;
            }
        }
        acc
    }
}

/// How probe sequences are drawn during a campaign.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SequencePlan {
    Ramsey,
    /// CPMG with `f_pi` drawn uniformly in `[f_pi_min, f_pi_max]` for each probe.
    Nbdd { f_pi_min: f64, f_pi_max: f64 },
    /// Poisson π-pulse times with the given mean rate.
    Bbdd { rate: f64 },
}

impl SequencePlan {
    pub fn scheme(&self) -> Scheme {
        match self {
            SequencePlan::Ramsey => Scheme::Ds,
            SequencePlan::Nbdd { .. } => Scheme::Nbdd,
            SequencePlan::Bbdd { .. } => Scheme::Bbdd,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            SequencePlan::Ramsey => Ok(()),
            SequencePlan::Nbdd { f_pi_min, f_pi_max } => {
                if f_pi_min > 0.0 && f_pi_max >= f_pi_min && f_pi_max.is_finite() {
                    Ok(())
                } else {
                    Err(Error::param(
                        "f_pi",
                        format!("need 0 < f_pi_min <= f_pi_max, got [{f_pi_min}, {f_pi_max}]"),
                    ))
                }
            }
            SequencePlan::Bbdd { rate } => {
                if rate.is_finite() && rate >= 0.0 {
                    Ok(())
                } else {
                    Err(Error::param("f_pi", format!("must be non-negative, got {rate}")))
                }
            }
        }
    }

    pub fn draw<R: Rng + ?Sized>(&self, center: f64, duration: f64, rng: &mut R) -> Result<PulseSequence> {
        match *self {
            SequencePlan::Ramsey => PulseSequence::ramsey(center, duration),
            SequencePlan::Nbdd { f_pi_min, f_pi_max } => {
                let f_pi = if f_pi_max > f_pi_min {
                    rng.random_range(f_pi_min..=f_pi_max)
                } else {
                    f_pi_min
                };
                PulseSequence::nbdd(center, duration, f_pi)
            }
            SequencePlan::Bbdd { rate } => PulseSequence::bbdd(center, duration, rate, rng),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Composite 5-point Gauss-Legendre on each constant-sign piece.
    fn brute_force(seq: &PulseSequence, f: f64) -> (f64, f64) {
        let nodes = [
            (0.0, 0.568_888_888_888_888_9),
            (-0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
            (0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
            (-0.906_179_845_938_664, 0.236_926_885_056_189_1),
            (0.906_179_845_938_664, 0.236_926_885_056_189_1),
        ];
        let mut flips: Vec<f64> = vec![seq.start()];
        flips.extend(seq.pi_pulse_times().iter().map(|p| seq.start() + p));
        flips.push(seq.end());
        let (mut gi, mut gq) = (0.0, 0.0);
        for w in flips.windows(2) {
            let mid = 0.5 * (w[0] + w[1]);
            let g = seq.sign_at(mid);
            let pieces = 400;
            let h = (w[1] - w[0]) / pieces as f64;
            for k in 0..pieces {
                let c = w[0] + (k as f64 + 0.5) * h;
                for (x, wt) in nodes {
                    let t = c + 0.5 * h * x;
                    gi += g * wt * 0.5 * h * (2.0 * PI * f * t).cos();
                    gq += g * wt * 0.5 * h * (2.0 * PI * f * t).sin();
                }
            }
        }
        (gi, gq)
    }

    #[test]
    fn ramsey_is_constant() {
        let s = PulseSequence::ramsey(0.0, 1.0).unwrap();
        assert_eq!(s.start(), -0.5);
        assert_eq!(s.end(), 0.5);
        assert_eq!(s.sign_at(-0.5), 1.0);
        assert_eq!(s.sign_at(0.49), 1.0);
        assert_eq!(s.sign_at(0.6), 0.0);
        assert_eq!(s.integral(), 1.0);
        let ds = PulseSequence::ramsey(0.0, 100.0).unwrap();
        assert_eq!(ds.duration(), 100.0);
        assert!(ds.pi_pulse_times().is_empty());
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(PulseSequence::ramsey(0.0, 0.0).is_err());
        assert!(PulseSequence::ramsey(0.0, -1.0).is_err());
        assert!(PulseSequence::nbdd(0.0, 1.0, 0.0).is_err());
        assert!(PulseSequence::nbdd(0.0, 1.0, -2.0).is_err());
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(PulseSequence::bbdd(0.0, 1.0, -1.0, &mut rng).is_err());
        assert!(PulseSequence::from_parts(Scheme::Bbdd, 0.0, 1.0, vec![0.5, 0.4]).is_err());
        assert!(PulseSequence::from_parts(Scheme::Bbdd, 0.0, 1.0, vec![1.0]).is_err());
        assert!(PulseSequence::from_parts(Scheme::Bbdd, 0.0, 1.0, vec![0.0]).is_err());
    }

    #[test]
    fn nbdd_pulse_placement() {
        let s = PulseSequence::nbdd(0.0, 1.0, 4.0).unwrap();
        assert_eq!(s.pi_pulse_times(), &[0.125, 0.375, 0.625, 0.875]);
        let segs: Vec<_> = s.segments().collect();
        assert_eq!(segs.len(), 5);
        for &(a, b, _) in &segs[1..4] {
            assert!((b - a - 0.25).abs() < 1e-15);
        }
        let signs: Vec<f64> = segs.iter().map(|s| s.2).collect();
        assert_eq!(signs, vec![1.0, -1.0, 1.0, -1.0, 1.0]);

        assert_eq!(PulseSequence::nbdd(0.0, 1.0, 2.0).unwrap().pi_pulse_times().len(), 2);
        let slow = PulseSequence::nbdd(0.0, 1.0, 1e-3).unwrap();
        assert!(slow.pi_pulse_times().is_empty());
    }

    #[test]
    fn bbdd_mean_count_is_poisson() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let (tp, rate) = (0.25, 20.0);
        let n = 10_000;
        let total: usize = (0..n)
            .map(|_| PulseSequence::bbdd(0.0, tp, rate, &mut rng).unwrap().pi_pulse_times().len())
            .sum();
        let mean = total as f64 / n as f64;
        let expected = rate * tp;
        let sigma = (expected / n as f64).sqrt();
        assert!((mean - expected).abs() < 3.0 * sigma, "mean {mean}");

        let none = PulseSequence::bbdd(0.0, tp, 0.0, &mut rng).unwrap();
        assert!(none.pi_pulse_times().is_empty());
    }

    #[test]
    fn ramsey_quadrature_limits() {
        let tp = 2.0;
        let s = PulseSequence::ramsey(0.0, tp).unwrap();
        let q = s.quadrature_components(0.0);
        assert_eq!(q.g_i, tp);
        assert_eq!(q.g_q, 0.0);
        for k in 1..=3 {
            let q = s.quadrature_components(k as f64 / tp);
            assert!(q.power().sqrt() < 1e-12, "k={k}: {q:?}");
        }
    }

    #[test]
    fn quadrature_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for i in 0..30 {
            let plan = match i % 3 {
                0 => SequencePlan::Ramsey,
                1 => SequencePlan::Nbdd { f_pi_min: 2.0, f_pi_max: 5.0 },
                _ => SequencePlan::Bbdd { rate: 20.0 },
            };
            let center = rng.random_range(-50.0..50.0);
            let seq = plan.draw(center, 1.0, &mut rng).unwrap();
            let f = rng.random_range(0.0..10.0);
            let q = seq.quadrature_components(f);
            let (gi, gq) = brute_force(&seq, f);
            let scale = q.power().sqrt().max(1e-6);
            assert!((q.g_i - gi).abs() / scale < 1e-9, "{i}: {} vs {gi}", q.g_i);
            assert!((q.g_q - gq).abs() / scale < 1e-9, "{i}: {} vs {gq}", q.g_q);
        }
    }

    #[test]
    fn nbdd_lock_in_peak() {
        let f_pi = 4.0;
        let s = PulseSequence::nbdd(0.0, 1.0, f_pi).unwrap();
        let powers: Vec<f64> = [f_pi / 8.0, f_pi / 4.0, f_pi / 2.0, f_pi]
            .iter()
            .map(|&f| s.quadrature_components(f).power())
            .collect();
        let best = powers
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0;
        assert_eq!(best, 2, "{powers:?}");
    }

    #[test]
    fn boundary_weights_reproduce_response() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let seq = PulseSequence::bbdd(12.3, 0.25, 20.0, &mut rng).unwrap();
        let f = 3.3;
        let sum: Complex64 = seq
            .boundary_weights()
            .iter()
            .map(|&(t, w)| Complex64::from_polar(w, 2.0 * PI * f * t))
            .sum();
        let via = sum / Complex64::new(0.0, 2.0 * PI * f);
        let direct = seq.response(f);
        assert!((via - direct).norm() < 1e-12);
    }

    #[test]
    fn accumulate_constant_detuning() {
        let s = PulseSequence::ramsey(0.5, 1.0).unwrap();
        let v = vec![3.0; 101];
        let trace = SampledTrace::new(0.0, 0.01, &v);
        let phi = s.accumulate_phase(&trace).unwrap();
        assert!((phi - 2.0 * PI * 3.0).abs() < 1e-12);

        let flipped = PulseSequence::from_parts(Scheme::Nbdd, 0.5, 1.0, vec![0.5]).unwrap();
        assert!(flipped.accumulate_phase(&trace).unwrap().abs() < 1e-12);
    }

    #[test]
    fn accumulate_matches_quadrature() {
        let f = 3.0;
        let dt = 1e-5;
        let seq = PulseSequence::nbdd(10.5, 1.0, 3.7).unwrap();
        let t0 = 10.0;
        let v: Vec<f64> = (0..=100_000)
            .map(|k| (2.0 * PI * f * (t0 + k as f64 * dt)).cos())
            .collect();
        let phi = seq.accumulate_phase(&SampledTrace::new(t0, dt, &v)).unwrap();
        let expected = 2.0 * PI * seq.quadrature_components(f).g_i;
        assert!((phi - expected).abs() < 1e-7 * expected.abs().max(1.0), "{phi} vs {expected}");
    }

    #[test]
    fn accumulate_rejects_short_grid() {
        let s = PulseSequence::ramsey(0.5, 1.0).unwrap();
        let v = vec![1.0; 50];
        let err = s.accumulate_phase(&SampledTrace::new(0.0, 0.01, &v)).unwrap_err();
        assert!(matches!(err, Error::GridCoverage { .. }));
    }

    #[test]
    fn stepwise_integration() {
        let seq = PulseSequence::from_parts(Scheme::Nbdd, 1.5, 3.0, vec![1.5]).unwrap();
        let vals = [1.0, 2.0, 3.0];
        let trace = StepTrace { t0: 0.0, width: 1.0, values: &vals };
        // +1·(1 + 0.5·2) − 1·(0.5·2 + 3)
        let phi = seq.accumulate_phase_stepwise(&trace).unwrap();
        assert!((phi - 2.0 * PI * (2.0 - 4.0)).abs() < 1e-12);
    }

    #[test]
    fn json_record_round_trip() {
        let s = PulseSequence::nbdd(1.25, 1.0, 3.3).unwrap();
        let json = serde_json::to_string(&s).unwrap();
        assert!(json.contains("\"T_p\":1.0"));
        assert!(json.contains("\"scheme\":\"nbdd\""));
        let back: PulseSequence = serde_json::from_str(&json).unwrap();
        assert_eq!(back, s);
        let bad = r#"{"scheme":"bbdd","t_j":0.0,"T_p":1.0,"pulse_times":[0.7,0.2]}"#;
        assert!(serde_json::from_str::<PulseSequence>(bad).is_err());
    }

    proptest! {
        #[test]
        fn quadrature_power_is_translation_invariant(
            seed in 0u64..1000,
            shift in -1.0e3..1.0e3f64,
            f in 0.0..20.0f64,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let seq = PulseSequence::bbdd(0.0, 0.5, 20.0, &mut rng).unwrap();
            let moved = seq.shifted_to(shift);
            let p0 = seq.quadrature_components(f).power();
            let p1 = moved.quadrature_components(f).power();
            prop_assert!((p0 - p1).abs() <= 1e-9 * p0.max(1e-12));
        }

        #[test]
        fn quadrature_bounded_by_duration(seed in 0u64..1000, f in 0.0..50.0f64) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let seq = PulseSequence::bbdd(3.0, 0.25, 40.0, &mut rng).unwrap();
            let q = seq.quadrature_components(f);
            prop_assert!(q.g_i.abs() <= 0.25 + 1e-12);
            prop_assert!(q.g_q.abs() <= 0.25 + 1e-12);
        }
    }
}
