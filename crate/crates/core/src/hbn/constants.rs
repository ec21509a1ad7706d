use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Physical inputs in SI-style units as they appear at the configuration
/// boundary. Frequencies handed to the engines are angular, in rad/us.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhysicalConstants {
    /// Vacuum permeability, T m / A.
    pub mu0: f64,
    /// Reduced Planck constant, J s.
    pub hbar: f64,
    /// Electron gyromagnetic ratio / 2 pi, Hz/T.
    pub gamma_e: f64,
    /// 11-B gyromagnetic ratio / 2 pi, Hz/T.
    pub gamma_b11: f64,
    /// 14-N gyromagnetic ratio / 2 pi, Hz/T.
    pub gamma_n14: f64,
    /// Zero-field splitting / 2 pi, Hz.
    pub d_zfs: f64,
    /// Nearest-neighbour B-N distance, angstrom.
    pub bond_length: f64,
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self {
            mu0: 4.0e-7 * std::f64::consts::PI,
            hbar: 1.054_571_817e-34,
            gamma_e: 28.024e9,
            gamma_b11: 13.66e6,
            gamma_n14: 3.078e6,
            d_zfs: 3.5e9,
            bond_length: 1.5,
        }
    }
}

/// Multiply a frequency in Hz by this to get rad/us.
pub const HZ_TO_RAD_PER_US: f64 = 2.0 * std::f64::consts::PI * 1e-6;
/// Multiply an angular frequency in rad/s by this to get rad/us.
pub const RAD_PER_S_TO_RAD_PER_US: f64 = 1e-6;
pub const ANGSTROM: f64 = 1e-10;

impl PhysicalConstants {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("mu0", self.mu0),
            ("hbar", self.hbar),
            ("gamma_e", self.gamma_e),
            ("gamma_b11", self.gamma_b11),
            ("gamma_n14", self.gamma_n14),
            ("d_zfs", self.d_zfs),
            ("bond_length", self.bond_length),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("constant {name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    /// `(mu0 / 4 pi) hbar gamma_a gamma_b / r^3` in rad/us, for gyromagnetic
    /// ratios given in Hz/T and `r` in angstrom.
    pub fn dipolar_strength(&self, gamma_a: f64, gamma_b: f64, r: f64) -> f64 {
        let two_pi = 2.0 * std::f64::consts::PI;
        let rad_s = self.mu0 / (4.0 * std::f64::consts::PI) * self.hbar * (two_pi * gamma_a) * (two_pi * gamma_b) / (r * ANGSTROM).powi(3);
        rad_s * RAD_PER_S_TO_RAD_PER_US
    }

    /// Zero-field splitting `D` in rad/us.
    pub fn d_angular(&self) -> f64 {
        self.d_zfs * HZ_TO_RAD_PER_US
    }

    /// Electron Larmor frequency `omega_e = -gamma_e B` in rad/us.
    pub fn electron_larmor(&self, field: f64) -> f64 {
        -self.gamma_e * field * HZ_TO_RAD_PER_US
    }
}
