//! Physical constants and wavelength/frequency conversions.
//!
//! Everything inside the crate works in angular frequency (rad/s) and SI
//! lengths; wavelengths in um or nm only appear at I/O boundaries.

use std::f64::consts::PI;

/// Speed of light in vacuum (m/s).
pub const C: f64 = 299_792_458.0;

pub fn omega_from_um(wavelength_um: f64) -> f64 {
    2.0 * PI * C / (wavelength_um * 1e-6)
}

pub fn um_from_omega(omega: f64) -> f64 {
    2.0 * PI * C / omega * 1e6
}

pub fn omega_from_nm(wavelength_nm: f64) -> f64 {
    omega_from_um(wavelength_nm * 1e-3)
}

pub fn nm_from_omega(omega: f64) -> f64 {
    um_from_omega(omega) * 1e3
}

/// Converts a small angular-frequency interval around `omega` into a
/// wavelength interval in nm (first-order, |dλ/dω|).
pub fn bandwidth_nm(omega: f64, delta_omega: f64) -> f64 {
    let lambda_m = 2.0 * PI * C / omega;
    lambda_m * lambda_m * delta_omega / (2.0 * PI * C) * 1e9
}

/// Inverse of [`bandwidth_nm`].
pub fn bandwidth_omega(omega: f64, delta_nm: f64) -> f64 {
    let lambda_m = 2.0 * PI * C / omega;
    2.0 * PI * C * delta_nm * 1e-9 / (lambda_m * lambda_m)
}
