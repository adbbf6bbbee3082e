//! Physical constants and atomic transition data.

use std::f64::consts::PI;

use crate::{Error, Result};

/// Fundamental constants in SI units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysConsts {
    pub hbar: f64,
    pub eps0: f64,
    pub c: f64,
    pub mu_b: f64,
    pub k_b: f64,
    pub rb87_mass: f64,
}

pub const SI: PhysConsts = PhysConsts {
    hbar: 1.054_571_817e-34,
    eps0: 8.854_187_812_8e-12,
    c: 299_792_458.0,
    mu_b: 9.274_010_078_3e-24,
    k_b: 1.380_649e-23,
    rb87_mass: 1.443_160_648e-25,
};

impl Default for PhysConsts {
    fn default() -> Self {
        SI
    }
}

/// Optical transition driven by the signal field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    /// Dipole matrix element, C·m.
    pub dipole: f64,
    /// Excited-state decay rate, rad/s.
    pub gamma: f64,
    /// Carrier wavenumber, rad/m.
    pub k0: f64,
    /// Carrier angular frequency, rad/s.
    pub omega0: f64,
}

impl Transition {
    pub fn new(dipole: f64, gamma: f64, wavelength: f64) -> Result<Self> {
        if !(dipole > 0.0) {
            return Err(Error::param("dipole", "must be positive"));
        }
        if !(gamma > 0.0) {
            return Err(Error::param("gamma", "must be positive"));
        }
        if !(wavelength > 0.0) {
            return Err(Error::param("wavelength", "must be positive"));
        }
        let k0 = 2.0 * PI / wavelength;
        Ok(Self { dipole, gamma, k0, omega0: k0 * SI.c })
    }

    /// Rubidium-87 D1 line (5S₁/₂ → 5P₁/₂, 795 nm).
    pub fn rb87_d1() -> Self {
        Self::new(2.537e-29, 2.0 * PI * 5.75e6, 794.978_851e-9).expect("valid constants")
    }

    /// Rubidium-87 D2 line (5S₁/₂ → 5P₃/₂, 780 nm).
    pub fn rb87_d2() -> Self {
        Self::new(3.584e-29, 2.0 * PI * 6.065e6, 780.241_209e-9).expect("valid constants")
    }

    pub fn wavelength(&self) -> f64 {
        2.0 * PI / self.k0
    }

    /// Same transition with a different decay rate.
    pub fn with_gamma(self, gamma: f64) -> Result<Self> {
        Self::new(self.dipole, gamma, self.wavelength())
    }

    /// Optical depth per unit column density, 2·k₀·d²/(ħ·ε₀·Γ).
    pub fn od_per_column(&self) -> f64 {
        2.0 * self.k0 * self.dipole.powi(2) / (SI.hbar * SI.eps0 * self.gamma)
    }

    /// Photons per unit area per second carried by a unit Rabi frequency squared:
    /// ħ·ε₀·c/(2·ω₀·d²).
    pub fn photon_flux_per_rabi2(&self) -> f64 {
        SI.hbar * SI.eps0 * SI.c / (2.0 * self.omega0 * self.dipole.powi(2))
    }
}

/// Additional excited level reached by the same beams.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExcitedLevel {
    /// Single-photon detuning from this level, rad/s.
    pub detuning: f64,
    /// Signal-transition dipole moment relative to the reference transition.
    pub dipole_ratio: f64,
    /// Coupling-transition dipole moment relative to the one that defines the coupling Rabi frequency.
    pub coupling_ratio: f64,
}

impl ExcitedLevel {
    pub fn new(detuning: f64, dipole_ratio: f64) -> Self {
        Self { detuning, dipole_ratio, coupling_ratio: 1.0 }
    }

    pub fn with_coupling_ratio(mut self, ratio: f64) -> Self {
        self.coupling_ratio = ratio;
        self
    }

    /// The reference level itself.
    pub fn reference(detuning: f64) -> Self {
        Self::new(detuning, 1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn k0_matches_omega0_over_c() {
        for tr in [Transition::rb87_d1(), Transition::rb87_d2()] {
            assert!((tr.k0 - tr.omega0 / SI.c).abs() / tr.k0 < 1e-12);
        }
    }

    #[test]
    fn rejects_nonpositive_gamma() {
        assert!(Transition::new(1e-29, 0.0, 795e-9).is_err());
        assert!(Transition::new(1e-29, -1.0, 795e-9).is_err());
    }

    #[test]
    fn constants_are_positive() {
        let p = PhysConsts::default();
        for v in [p.hbar, p.eps0, p.c, p.mu_b, p.k_b, p.rb87_mass] {
            assert!(v > 0.0);
        }
    }
}
