// Copyright 2026 The clockdm Authors
// SPDX-License-Identifier: Apache-2.0

//! Physical constants and natural-unit conversions.
//!
//! Every conversion between hertz, electronvolts and energy densities goes
//! through this module. Natural units here mean `ħ = c = 1` with energies in eV.

use std::f64::consts::PI;

/// Speed of light, m/s (exact).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
/// Planck constant, eV·s (exact in SI 2019).
pub const PLANCK_EV_S: f64 = 4.135_667_696e-15;
/// Reduced Planck constant, eV·s.
pub const HBAR_EV_S: f64 = PLANCK_EV_S / (2.0 * PI);
/// ħc, eV·m.
pub const HBAR_C_EV_M: f64 = HBAR_EV_S * SPEED_OF_LIGHT;
/// Planck mass `M_Pl c²`, eV (not the reduced Planck mass).
pub const PLANCK_MASS_EV: f64 = 1.220_890e28;

/// Wavelength of the thorium-229m nuclear clock transition, m.
pub const THORIUM_WAVELENGTH_M: f64 = 148.8e-9;
/// Strontium lattice clock transition frequency, Hz.
pub const STRONTIUM_CLOCK_HZ: f64 = 429.0e12;
/// Local dark matter density, GeV/cm³.
pub const LOCAL_DM_DENSITY_GEV_CM3: f64 = 0.4;
/// Enhancement factor of the thorium nuclear transition to variation of α.
pub const THORIUM_DELTA_K: f64 = 1.0e4;

/// Thorium clock laser frequency `c / λ₀`, Hz.
pub fn thorium_clock_frequency() -> f64 {
    SPEED_OF_LIGHT / THORIUM_WAVELENGTH_M
}

/// Particle mass (eV) whose Compton frequency is `f_hz`: `m c² = h f`.
pub fn mass_from_frequency(f_hz: f64) -> f64 {
    PLANCK_EV_S * f_hz
}

/// Compton frequency (Hz) of a particle of mass `mass_ev`.
pub fn frequency_from_mass(mass_ev: f64) -> f64 {
    mass_ev / PLANCK_EV_S
}

/// Converts an energy density from GeV/cm³ to eV⁴.
pub fn energy_density_ev4(rho_gev_cm3: f64) -> f64 {
    let hbar_c_ev_cm = HBAR_C_EV_M * 100.0;
    rho_gev_cm3 * 1.0e9 * hbar_c_ev_cm.powi(3)
}

/// Field amplitude `Φ₀ = (ħ / m c) √(2ρ)` in natural units (eV).
pub fn field_amplitude_ev(rho_gev_cm3: f64, mass_ev: f64) -> f64 {
    (2.0 * energy_density_ev4(rho_gev_cm3)).sqrt() / mass_ev
}

/// Coupling normalization `κ = √(4π) / M_Pl`, 1/eV.
pub fn kappa() -> f64 {
    (4.0 * PI).sqrt() / PLANCK_MASS_EV
}
