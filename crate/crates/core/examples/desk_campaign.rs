// Copyright 2026 The clockdm Authors
// SPDX-License-Identifier: Apache-2.0

//! A small broadband dynamical decoupling campaign written to JSON lines,
//! then read back and exported as CSV.

use clockdm::campaign::{read_results, run_campaign, write_bounds_csv, CampaignConfig, FrequencyGrid, RunOptions};
use clockdm::sequence::Scheme;

fn main() -> clockdm::Result<()> {
    let dir = std::env::temp_dir().join("clockdm-desk-campaign");
    std::fs::create_dir_all(&dir).map_err(|e| clockdm::Error::Config(e.to_string()))?;
    let output = dir.join("bbdd.jsonl");
    let config = CampaignConfig {
        t_m: 200.0,
        grid: FrequencyGrid::LogSpaced { f_min: 1.0, f_max: 10.0, points: 3 },
        n_measurements: Some(20),
        analysis_points: 100,
        output: Some(output.clone()),
        ..CampaignConfig::new(Scheme::Bbdd)
    };
    print!("{}", config.to_toml_string()?);
    let report = run_campaign(&config, &RunOptions::default())?;
    println!("{} points, {} failures", report.results.len(), report.failures.len());

    let results = read_results(&output)?;
    let mut csv = Vec::new();
    write_bounds_csv(&results, &mut csv).expect("in-memory write");
    print!("{}", String::from_utf8_lossy(&csv));
    Ok(())
}
