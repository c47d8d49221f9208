// Copyright 2026 The clockdm Authors
// SPDX-License-Identifier: Apache-2.0

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("sampling grid [{grid_start}, {grid_end}] s does not cover probe [{probe_start}, {probe_end}] s")]
    GridCoverage {
        grid_start: f64,
        grid_end: f64,
        probe_start: f64,
        probe_end: f64,
    },

    #[error("synthesis period {period} s is shorter than the measurement time {t_m} s")]
    SynthesisPeriod { period: f64, t_m: f64 },

    #[error("analysis grid spacing {spacing} Hz does not resolve 1/T_m = {resolution} Hz")]
    CoarseGrid { spacing: f64, resolution: f64 },

    #[error("grids differ in length ({left} vs {right})")]
    GridMismatch { left: usize, right: usize },

    #[error("empty probe list")]
    NoProbes,

    #[error("need at least {required} realizations, got {got}")]
    InsufficientRealizations { required: usize, got: usize },

    #[error("fit did not converge after {attempts} attempts (best mse {mse})")]
    FitDidNotConverge { attempts: usize, mse: f64 },

    #[error("config: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
