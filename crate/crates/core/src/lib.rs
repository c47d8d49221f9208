// Copyright 2026 The clockdm Authors
// SPDX-License-Identifier: Apache-2.0

//! Monte Carlo simulation of dark matter searches with optical and nuclear clocks.
//!
//! The crate models how a clock operated with differential spectroscopy (DS),
//! narrowband dynamical decoupling (NBDD) or broadband dynamical decoupling
//! (BBDD) responds to an oscillation of its transition frequency driven by
//! ultralight scalar dark matter, and how well that oscillation can be told
//! apart from laser frequency noise and quantum projection noise.
//!
//! The pipeline, one module per stage:
//!
//! * [`sequence`]: pulse sequences, their sensitivity functions `g(t)` and the
//!   closed-form in-phase / quadrature response integrals.
//! * [`dm`]: the stochastic dark matter field, synthesized from its lineshape.
//! * [`noise`]: flicker laser noise from a Mandelbrot state-space model, the
//!   white effective noise seen by differential spectroscopy, and projection noise.
//! * [`analysis`]: coherent sign-weighted combination of probe phases, the
//!   expected lineshape, amplitude fitting and 95% detection bounds.
//! * [`campaign`]: configuration, scans over the Compton frequency grid, parallel
//!   deterministic Monte Carlo, persistence and conversion to coupling bounds.
//!
//! All fractional frequencies are dimensionless (`δν/ν₀`), times are in seconds
//! and frequencies in hertz. Phases are in radians.

pub mod allan;
pub mod analysis;
pub mod campaign;
pub mod cli;
pub mod dm;
pub mod error;
pub mod noise;
pub mod sequence;
pub mod units;

pub use error::{Error, Result};
