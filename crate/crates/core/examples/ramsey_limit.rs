// Copyright 2026 The clockdm Authors
// SPDX-License-Identifier: Apache-2.0

//! Differential spectroscopy limited by projection noise only, compared with
//! the analytic Ramsey bound `X / (2π ν₀ √(T_p T_m))`.

use clockdm::campaign::{CampaignConfig, FrequencyGrid};
use clockdm::noise::LaserNoise;
use clockdm::sequence::Scheme;

fn main() -> clockdm::Result<()> {
    let t_m = 1e4;
    let config = CampaignConfig {
        t_m,
        t_p: Some(10.0),
        grid: FrequencyGrid::Values { values: vec![10.0 / t_m] },
        n_measurements: Some(1000),
        laser_noise: Some(LaserNoise::None),
        analysis_points: 200,
        seed: 2,
        ..CampaignConfig::new(Scheme::Ds)
    };
    let campaign = config.resolve()?;
    let r = campaign.run_point(0)?;
    println!("simulated bound   {:.4e}", r.bound_95);
    println!("analytic bound    {:.4e}", r.analytic_ramsey);
    println!("ratio             {:.3}", r.bound_95 / r.analytic_ramsey);
    println!("effective X       {:.3}", 3.95 * r.bound_95 / r.analytic_ramsey);
    println!("fractional sigma  {:.4e}", r.sigma_fractional);
    println!("noise floor p2    {:.3} (predicted {:.3})", r.fit.noise_p2_median, r.fit.predicted_floor);
    Ok(())
}
