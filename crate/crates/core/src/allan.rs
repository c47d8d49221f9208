// Copyright 2026 The clockdm Authors
// SPDX-License-Identifier: Apache-2.0

//! Overlapping Allan deviation of fractional frequency data.

/// Overlapping Allan variance at averaging factor `n` (τ = n·τ₀) of evenly
/// spaced fractional frequency samples. `None` if the series is too short.
pub fn overlapping_avar(y: &[f64], tau0: f64, n: usize) -> Option<f64> {
    if n == 0 || y.len() < 2 * n {
        return None;
    }
    // phase x_k = τ₀ Σ_{i<k} y_i
    let mut x = Vec::with_capacity(y.len() + 1);
    let mut acc = 0.0;
    x.push(0.0);
    for &v in y {
        acc += v * tau0;
        x.push(acc);
    }
    let terms = x.len() - 2 * n;
    let sum: f64 = (0..terms)
        .map(|i| {
            let d = x[i + 2 * n] - 2.0 * x[i + n] + x[i];
            d * d
        })
        .sum();
    let tau = n as f64 * tau0;
    Some(sum / (2.0 * tau * tau * terms as f64))
}

pub fn overlapping_adev(y: &[f64], tau0: f64, n: usize) -> Option<f64> {
    overlapping_avar(y, tau0, n).map(f64::sqrt)
}

/// Least-squares slope of `log10 σ(τ)` against `log10 τ`.
pub fn log_log_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let (sx, sy) = points
        .iter()
        .fold((0.0, 0.0), |(a, b), &(x, y)| (a + x.log10(), b + y.log10()));
    let (mx, my) = (sx / n, sy / n);
    let (mut num, mut den) = (0.0, 0.0);
    for &(x, y) in points {
        let dx = x.log10() - mx;
        num += dx * (y.log10() - my);
        den += dx * dx;
    }
    num / den
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn constant_series_has_zero_deviation() {
        let y = vec![2.5; 100];
        assert_eq!(overlapping_adev(&y, 1.0, 4), Some(0.0));
        assert_eq!(overlapping_adev(&y, 1.0, 60), None);
    }

    #[test]
    fn white_noise_scales_as_inverse_sqrt_tau() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let y: Vec<f64> = (0..200_000).map(|_| StandardNormal.sample(&mut rng)).collect();
        let a1 = overlapping_adev(&y, 1.0, 1).unwrap();
        assert!((a1 - 1.0).abs() < 0.02, "{a1}");
        let pts: Vec<(f64, f64)> = [1usize, 4, 16, 64]
            .iter()
            .map(|&n| (n as f64, overlapping_adev(&y, 1.0, n).unwrap()))
            .collect();
        let slope = log_log_slope(&pts);
        assert!((slope + 0.5).abs() < 0.05, "{slope}");
    }

    #[test]
    fn linear_drift() {
        // y_k = k: the phase second difference is n², so σ² = n²/2
        let y: Vec<f64> = (0..1000).map(|k| k as f64).collect();
        let a = overlapping_avar(&y, 1.0, 10).unwrap();
        assert!((a - 50.0).abs() < 1e-9, "{a}");
    }
}
