// Copyright 2026 The clockdm Authors
// SPDX-License-Identifier: Apache-2.0

//! Sensitivity `|G(f)|²` of one probe under each protocol, normalized to the
//! Ramsey value at zero frequency.

use clockdm::sequence::PulseSequence;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> clockdm::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let ds = PulseSequence::ramsey(50.0, 100.0)?;
    let nbdd = PulseSequence::nbdd(0.5, 1.0, 3.0)?;
    let bbdd = PulseSequence::bbdd(0.125, 0.25, 20.0, &mut rng)?;
    println!("nbdd pi pulses at {:?}", nbdd.pi_pulse_times());
    println!("bbdd pi pulses at {:?}", bbdd.pi_pulse_times());

    println!("{:>10} {:>12} {:>12} {:>12}", "f_hz", "ds", "nbdd", "bbdd");
    for f in [1e-4, 1e-3, 5e-3, 1e-2, 0.1, 1.0, 3.0, 10.0, 100.0] {
        let rel = |s: &PulseSequence| s.quadrature_components(f).power() / (s.duration() * s.duration());
        println!("{f:>10.1e} {:>12.3e} {:>12.3e} {:>12.3e}", rel(&ds), rel(&nbdd), rel(&bbdd));
    }
    Ok(())
}
