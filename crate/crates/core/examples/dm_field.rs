// Copyright 2026 The clockdm Authors
// SPDX-License-Identifier: Apache-2.0

//! One stochastic realization of the scalar field, reduced to the amplitude
//! and phase seen by each probe. Prints the first rows of the CSV trace and
//! the coherence time.

use clockdm::dm::{synthesize_realization, DmParameters, POINTS_ON_LINE};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> clockdm::Result<()> {
    let params = DmParameters::new(0.1, 1e-18)?;
    let (lo, hi) = params.support();
    println!("f_dm {} Hz, coherence time {:.3e} s", params.f_dm, params.coherence_time());
    println!("line support {lo:.3e} .. {hi:.3e} Hz around f_dm");

    let seed = 11;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r = synthesize_realization(&params, 1e6, 1.0, POINTS_ON_LINE, &mut rng)?;
    let mean_square = r.probes.iter().map(|p| p.nu * p.nu).sum::<f64>() / r.len() as f64;
    println!("{} probes, <nu^2> / phi0^2 = {:.3}", r.len(), mean_square / 1e-36);

    let mut csv = Vec::new();
    r.write_csv(&mut csv, seed).expect("in-memory write");
    for line in String::from_utf8_lossy(&csv).lines().take(6) {
        println!("{line}");
    }
    Ok(())
}
