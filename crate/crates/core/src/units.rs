//! Physical constants and unit conversions.
//!
//! Everything inside the crate works in SI with angular frequencies in rad/s.
//! Hz only appears at I/O boundaries through [`hz`] and [`to_hz`].

use std::f64::consts::PI;

/// Boltzmann constant, J/K (exact since the 2019 SI redefinition).
pub const BOLTZMANN: f64 = 1.380_649e-23;

/// Reduced Planck constant, J·s.
pub const HBAR: f64 = 1.054_571_817e-34;

/// Bohr radius, m.
pub const BOHR_RADIUS: f64 = 5.291_772_109_03e-11;

/// Mass of ⁸⁷Rb, kg.
pub const RB87_MASS: f64 = 1.443_16e-25;

/// Reference density 10¹² cm⁻³ expressed in m⁻³. Dimensionless densities n̄
/// in presets and reports are in multiples of this.
pub const DENSITY_UNIT: f64 = 1.0e18;

/// Field value of the magic point of the |F=1,m=-1> to |F=2,m=1> transition, G.
/// Documentation only; Δ₀ is always a model input.
pub const MAGIC_FIELD_GAUSS: f64 = 3.228_917;

/// Converts a frequency in Hz to an angular rate in rad/s.
#[inline]
pub fn hz(f: f64) -> f64 {
    2.0 * PI * f
}

/// Converts an angular rate in rad/s to Hz.
#[inline]
pub fn to_hz(omega: f64) -> f64 {
    omega / (2.0 * PI)
}
