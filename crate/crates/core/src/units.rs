//! Physical constants (CODATA 2018) and unit conversions.
//!
//! Internally every frequency is an angular frequency in rad/s. Files and
//! command-line flags use ordinary frequency (Hz or MHz) and V/m.

use std::f64::consts::PI;

/// Reduced Planck constant, J·s.
pub const HBAR: f64 = 1.054_571_817e-34;
/// Planck constant, J·s.
pub const PLANCK: f64 = 2.0 * PI * HBAR;
/// Boltzmann constant, J/K.
pub const K_B: f64 = 1.380_649e-23;
/// Atomic mass unit, kg.
pub const AMU: f64 = 1.660_539_066_60e-27;
/// Mass of a caesium-133 atom, kg.
pub const CS133_MASS: f64 = 132.905_451_961 * AMU;

/// Ordinary frequency in MHz to angular frequency in rad/s.
pub fn mhz_to_rad(f_mhz: f64) -> f64 {
    2.0 * PI * f_mhz * 1e6
}

/// Angular frequency in rad/s to ordinary frequency in MHz.
pub fn rad_to_mhz(w: f64) -> f64 {
    w / (2.0 * PI * 1e6)
}

/// Angular frequency in rad/s to ordinary frequency in Hz.
pub fn rad_to_hz(w: f64) -> f64 {
    w / (2.0 * PI)
}

/// Ordinary frequency in Hz to angular frequency in rad/s.
pub fn hz_to_rad(f_hz: f64) -> f64 {
    2.0 * PI * f_hz
}

/// Wavenumber 2π/λ for a wavelength in metres.
pub fn wavenumber(lambda: f64) -> f64 {
    2.0 * PI / lambda
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conversions_invert() {
        assert_eq!(rad_to_mhz(mhz_to_rad(35.52)), 35.52);
        assert!((hz_to_rad(rad_to_hz(1.234e8)) - 1.234e8).abs() < 1e-6);
    }

    #[test]
    fn planck_matches_codata_exact_value() {
        assert!((PLANCK / 6.626_070_15e-34 - 1.0).abs() < 1e-9);
    }

    #[test]
    fn cs_mass() {
        assert!((CS133_MASS / 2.2069e-25 - 1.0).abs() < 1e-4);
    }
}
