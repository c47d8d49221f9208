// Copyright 2026 The clockdm Authors
// SPDX-License-Identifier: Apache-2.0

//! Flicker laser noise from the Mandelbrot generator: Allan deviation table
//! and spectral slope.

use clockdm::noise::validate_flicker;

fn main() -> clockdm::Result<()> {
    let sigma_ln = 1e-16;
    let v = validate_flicker(sigma_ln, 0.01, 100_000, 8, &[0.1, 1.0, 10.0, 100.0], 3)?;
    println!("{:>8} {:>12} {:>8}", "tau_s", "adev", "ratio");
    for (tau, a) in &v.adev {
        println!("{tau:>8} {a:>12.3e} {:>8.3}", a / sigma_ln);
    }
    println!("psd slope {:.3} (flicker: -1)", v.psd_slope);
    Ok(())
}
