// Copyright 2026 The clockdm Authors
// SPDX-License-Identifier: Apache-2.0

//! Coherent combination of one measurement with an injected tone, followed
//! by the amplitude-plus-floor fit.

use clockdm::analysis::{expected_lineshape, fit_amplitude, AnalysisGrid, CoherentAccumulator};
use clockdm::dm::{probe_signal_phase, DmParameters, ProbeSignal};
use clockdm::noise::qpn_phase;
use clockdm::sequence::PulseSequence;
use clockdm::units::thorium_clock_frequency;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> clockdm::Result<()> {
    let (t_m, t_p, f_dm) = (1e4, 10.0, 1e-2);
    let nu0 = thorium_clock_frequency();
    let params = DmParameters::new(f_dm, 1.0)?;
    let grid = AnalysisGrid::around_line(&params, t_m, 200)?;
    let lineshape = expected_lineshape(&grid.frequencies(), &params, t_m)?;

    // Amplitude giving roughly ten times the projection-noise floor.
    let nu = 10.0 * (t_m / t_p).sqrt() / (2.0 * std::f64::consts::PI * nu0 * t_m);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut acc = CoherentAccumulator::new(grid, 1);
    let n_probes = (t_m / t_p) as usize;
    for j in 0..n_probes {
        let seq = PulseSequence::ramsey((j as f64 + 0.5) * t_p, t_p)?;
        let signal = ProbeSignal { nu, theta: 0.3 };
        let phase = probe_signal_phase(&seq, signal, f_dm, nu0) + qpn_phase(&mut rng);
        acc.add(&seq, &[phase])?;
    }
    let spectrum = acc.finish()?.remove(0);
    let fit = fit_amplitude(&spectrum, &lineshape, t_m, t_p)?;
    println!("peak phi_M    {:.3}", spectrum.nearest(f_dm));
    println!("fitted p1     {:.3}", fit.p1);
    println!("fitted p2     {:.3} (projection floor {:.3})", fit.p2, (t_m / t_p).sqrt());
    println!("mse           {:.3e} after {} optimizer runs", fit.mse, fit.attempts);
    Ok(())
}
