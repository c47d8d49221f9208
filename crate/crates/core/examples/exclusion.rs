// Copyright 2026 The clockdm Authors
// SPDX-License-Identifier: Apache-2.0

//! Converts a fractional frequency bound into a bound on the electron-mass
//! coupling `d_e`, using the analytic Ramsey sensitivity over the band.

use clockdm::analysis::ramsey_analytic_sensitivity;
use clockdm::campaign::{ExclusionParams, FrequencyGrid};
use clockdm::units::{field_amplitude_ev, kappa, mass_from_frequency, thorium_clock_frequency};

fn main() -> clockdm::Result<()> {
    let (t_p, t_m) = (100.0, 1e6);
    let params = ExclusionParams::default();
    let grid = FrequencyGrid::LogSpaced { f_min: 1e-5, f_max: 1e-3, points: 5 };
    println!("{:>10} {:>12} {:>12} {:>12}", "f_hz", "m_ev", "dnu/nu", "d_e");
    for f in grid.frequencies()? {
        let b = ramsey_analytic_sensitivity(f, t_p, t_m, thorium_clock_frequency());
        let m = mass_from_frequency(f);
        let phi0 = field_amplitude_ev(params.rho_dm * params.overdensity, m);
        let d_e = b.bound / (params.delta_k * kappa() * phi0);
        println!("{f:>10.2e} {m:>12.3e} {:>12.3e} {d_e:>12.3e}", b.bound);
    }
    Ok(())
}
