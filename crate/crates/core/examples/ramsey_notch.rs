// Copyright 2026 The clockdm Authors
// SPDX-License-Identifier: Apache-2.0

//! A Ramsey probe is blind at multiples of `1 / T_p`.

use clockdm::sequence::PulseSequence;

fn main() -> clockdm::Result<()> {
    let t_p = 100.0;
    let seq = PulseSequence::ramsey(0.5 * t_p, t_p)?;
    let reference = seq.response(0.1 / t_p).norm();
    println!("{:>10} {:>14}", "f * T_p", "|G| / |G(0.1)|");
    for i in 1..=40 {
        let x = 0.1 * i as f64;
        let g = seq.response(x / t_p).norm();
        println!("{x:>10.1} {:>14.3e}", g / reference);
    }
    Ok(())
}
