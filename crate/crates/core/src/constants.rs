//! Physical constants and unit conversions.
//!
//! Everything inside the library works in natural units (hbar = c = 1) with
//! keV as the energy unit, so lengths become inverse energies and areas become
//! keV^-2.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// Electron rest energy in keV.
pub const ELECTRON_MASS_KEV: f64 = 510.998_95;
/// Fine-structure constant.
pub const ALPHA: f64 = 1.0 / 137.035_999;
/// hbar * c in keV * pm.
pub const HBAR_C_KEV_PM: f64 = 197.326_980_4;

/// 1 pm^2 = 1e-20 cm^2 and 1 barn = 1e-24 cm^2, so 1 pm^2 = 1e4 barn.
const BARN_PER_PM2: f64 = 1.0e4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalConstants {
    m_e: f64,
    alpha: f64,
    hbar_c: f64,
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self {
            m_e: ELECTRON_MASS_KEV,
            alpha: ALPHA,
            hbar_c: HBAR_C_KEV_PM,
        }
    }
}

impl PhysicalConstants {
    pub fn new(m_e: f64, alpha: f64, hbar_c: f64) -> Result<Self> {
        for (name, v) in [("m_e", m_e), ("alpha", alpha), ("hbar_c", hbar_c)] {
            if !(v.is_finite() && v > 0.0) {
                return domain(format!("{name} must be finite and positive, got {v}"));
            }
        }
        Ok(Self { m_e, alpha, hbar_c })
    }

    /// Electron mass (keV).
    #[inline]
    pub fn m_e(&self) -> f64 {
        self.m_e
    }

    #[inline]
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// hbar * c (keV * pm).
    #[inline]
    pub fn hbar_c(&self) -> f64 {
        self.hbar_c
    }

    /// Converts a length in pm to natural units (keV^-1).
    pub fn length_to_inverse_energy(&self, w_pm: f64) -> Result<f64> {
        if !(w_pm.is_finite() && w_pm > 0.0) {
            return domain(format!("length must be finite and positive, got {w_pm} pm"));
        }
        Ok(w_pm / self.hbar_c)
    }

    /// Converts an area in keV^-2 to barn.
    pub fn natural_area_to_barn(&self, x: f64) -> Result<f64> {
        if !(x >= 0.0) {
            return domain(format!("area must be non-negative, got {x}"));
        }
        Ok(x * self.hbar_c * self.hbar_c * BARN_PER_PM2)
    }
}

/// Free-function form of [`PhysicalConstants::length_to_inverse_energy`].
pub fn length_to_inverse_energy(w_pm: f64, c: &PhysicalConstants) -> Result<f64> {
    c.length_to_inverse_energy(w_pm)
}

/// Free-function form of [`PhysicalConstants::natural_area_to_barn`].
pub fn natural_area_to_barn(x: f64, c: &PhysicalConstants) -> Result<f64> {
    c.natural_area_to_barn(x)
}
