//! Physical constants (CODATA 2018 exact / recommended values).

use std::f64::consts::PI;

/// Elementary charge (C).
pub const Q: f64 = 1.602176634e-19;
/// Boltzmann constant (J/K).
pub const K_B: f64 = 1.380649e-23;
/// Vacuum permittivity (F/m).
pub const EPS0: f64 = 8.8541878128e-12;
/// Electron gyromagnetic ratio used for NV line positions (Hz/T).
pub const NV_GYRO: f64 = 28.024e9;
/// Atomic number density of diamond (m^-3), used for ppm/ppb conversions.
pub const DIAMOND_ATOM_DENSITY: f64 = 1.763e29;

/// The fixed constant set shared by every solver.
///
/// Fields are private so that a value, once built, cannot drift from CODATA.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalConstants {
    q: f64,
    k: f64,
    eps0: f64,
}

impl PhysicalConstants {
    pub const CODATA: PhysicalConstants = PhysicalConstants {
        q: Q,
        k: K_B,
        eps0: EPS0,
    };

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn eps0(&self) -> f64 {
        self.eps0
    }

    /// kT/q in volts.
    pub fn thermal_voltage(&self, temperature: f64) -> f64 {
        self.k * temperature / self.q
    }

    /// Absolute permittivity ε₀·ε_s (F/m).
    pub fn permittivity(&self, eps_s: f64) -> f64 {
        self.eps0 * eps_s
    }

    /// 4π ε₀ ε_s, the denominator of the image-force term.
    pub fn image_force_denominator(&self, eps_s: f64) -> f64 {
        4.0 * PI * self.permittivity(eps_s)
    }
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self::CODATA
    }
}

/// kT/q (V) with the CODATA constants.
pub fn thermal_voltage(temperature: f64) -> f64 {
    PhysicalConstants::CODATA.thermal_voltage(temperature)
}
