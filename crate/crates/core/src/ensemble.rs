//! Atomic medium description and excitation bookkeeping.

use std::f64::consts::PI;

use crate::consts::{Transition, SI};
use crate::grid::{ComplexEnvelope, Domain, EnvelopeKind, Grid1D};
use crate::{Error, Result};

/// Longitudinal density shapes (unnormalised).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DensityProfile {
    /// Flat top of the given full length centred at zero.
    Uniform { length: f64 },
    /// exp(−z²/(2σ²)).
    Gaussian { sigma: f64 },
    /// exp(−z⁴/(4σ⁴)).
    SuperGaussian { sigma: f64 },
}

impl DensityProfile {
    pub fn shape(&self, z: f64) -> f64 {
        match *self {
            DensityProfile::Uniform { length } => {
                if z.abs() <= 0.5 * length {
                    1.0
                } else {
                    0.0
                }
            }
            DensityProfile::Gaussian { sigma } => (-z * z / (2.0 * sigma * sigma)).exp(),
            DensityProfile::SuperGaussian { sigma } => (-(z / sigma).powi(4) / 4.0).exp(),
        }
    }

    /// Operational length of the cloud.
    pub fn length(&self) -> f64 {
        match *self {
            DensityProfile::Uniform { length } => length,
            // Full width at half maximum.
            DensityProfile::Gaussian { sigma } => 2.0 * sigma * (2.0 * 2f64.ln()).sqrt(),
            DensityProfile::SuperGaussian { sigma } => 2.0 * sigma * (4.0 * 2f64.ln()).powf(0.25),
        }
    }
}

/// Default transverse beam diameter used to turn column densities into atom numbers.
pub const DEFAULT_BEAM_DIAMETER: f64 = 0.1e-3;

/// Atoms along the propagation axis.
///
/// `density` is the number density in atoms/m³ sampled at the cell centres of `grid`;
/// column integrals use the cell (rectangle) rule, the same quadrature the solver uses.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomEnsemble {
    grid: Grid1D,
    density: Vec<f64>,
    length: f64,
    od: f64,
    temperature: f64,
    beam_area: f64,
}

impl AtomEnsemble {
    /// Ensemble with an explicit density array; the optical depth is derived from it.
    pub fn from_density(grid: Grid1D, density: Vec<f64>, length: f64, tr: &Transition) -> Result<Self> {
        if density.len() != grid.count() {
            return Err(Error::DimensionMismatch { expected: grid.count(), got: density.len() });
        }
        if density.iter().any(|&n| !(n >= 0.0) || !n.is_finite()) {
            return Err(Error::param("density", "must be finite and non-negative"));
        }
        let column: f64 = density.iter().sum::<f64>() * grid.step();
        let area = PI * (0.5 * DEFAULT_BEAM_DIAMETER).powi(2);
        Ok(Self { grid, density, length, od: tr.od_per_column() * column, temperature: 20e-6, beam_area: area })
    }

    /// Ensemble of the given shape scaled so its optical depth equals `od`.
    pub fn with_profile(grid: Grid1D, profile: DensityProfile, od: f64, tr: &Transition) -> Result<Self> {
        if !(od >= 0.0) || !od.is_finite() {
            return Err(Error::param("od", "must be finite and non-negative"));
        }
        let shape: Vec<f64> = grid.points().map(|z| profile.shape(z)).collect();
        let sum: f64 = shape.iter().sum::<f64>() * grid.step();
        if !(sum > 0.0) {
            return Err(Error::param("profile", "no atoms on the grid"));
        }
        let scale = if od == 0.0 { 0.0 } else { od / (tr.od_per_column() * sum) };
        let density = shape.into_iter().map(|s| s * scale).collect();
        let mut ens = Self::from_density(grid, density, profile.length(), tr)?;
        ens.od = od;
        Ok(ens)
    }

    pub fn with_temperature(mut self, kelvin: f64) -> Self {
        self.temperature = kelvin;
        self
    }

    pub fn with_beam_diameter(mut self, diameter: f64) -> Self {
        self.beam_area = PI * (0.5 * diameter).powi(2);
        self
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }
    pub fn density(&self) -> &[f64] {
        &self.density
    }
    pub fn length(&self) -> f64 {
        self.length
    }
    pub fn od(&self) -> f64 {
        self.od
    }
    pub fn temperature(&self) -> f64 {
        self.temperature
    }
    pub fn beam_area(&self) -> f64 {
        self.beam_area
    }

    /// Column density ∫n dz, atoms/m².
    pub fn column(&self) -> f64 {
        self.density.iter().sum::<f64>() * self.grid.step()
    }

    /// Total atom number in the beam.
    pub fn atom_number(&self) -> f64 {
        self.column() * self.beam_area
    }

    /// Optical depth recomputed from the density.
    pub fn od_from_density(&self, tr: &Transition) -> f64 {
        tr.od_per_column() * self.column()
    }

    /// ∫n·|ρ|² dz times the beam area.
    pub fn atomic_excitations(&self, rho: &[num_complex::Complex64]) -> f64 {
        self.density.iter().zip(rho).map(|(n, r)| n * r.norm_sqr()).sum::<f64>()
            * self.grid.step()
            * self.beam_area
    }
}

/// Atomic excitation number ∫n|ρ|²dz and photon number (ε₀/2ħω₀)∫|A|²c dt,
/// both for the ensemble's beam area. The signal is a Rabi-frequency envelope; A = ħΩ/d.
pub fn excitation_counts(
    rho: &ComplexEnvelope,
    sig: &ComplexEnvelope,
    ens: &AtomEnsemble,
    tr: &Transition,
) -> Result<(f64, f64)> {
    if rho.kind() != EnvelopeKind::Direct(Domain::CoherenceInZ) {
        return Err(Error::param("rho", "expected a coherence-in-z envelope"));
    }
    if sig.kind() != EnvelopeKind::Direct(Domain::SignalInTime) {
        return Err(Error::param("sig", "expected a signal-in-time envelope"));
    }
    rho.check_same_grid(ens.grid())?;
    let n_at = ens.atomic_excitations(rho.values());
    let n_ph = photon_number(sig.values(), sig.grid().step(), tr, ens.beam_area());
    Ok((n_at, n_ph))
}

/// Photons carried by Rabi-frequency samples spaced `dt` through an area `area`.
pub fn photon_number(rabi: &[num_complex::Complex64], dt: f64, tr: &Transition, area: f64) -> f64 {
    let field_sq: f64 = rabi.iter().map(|w| (SI.hbar * w.norm() / tr.dipole).powi(2)).sum();
    SI.eps0 / (2.0 * SI.hbar * tr.omega0) * field_sq * SI.c * dt * area
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::C64;

    fn tr() -> Transition {
        Transition::rb87_d1()
    }

    #[test]
    fn od_matches_density() {
        let g = Grid1D::cell_centered(-0.01, 0.01, 400).unwrap();
        for p in [
            DensityProfile::Uniform { length: 0.01 },
            DensityProfile::Gaussian { sigma: 0.002 },
            DensityProfile::SuperGaussian { sigma: 0.003 },
        ] {
            let e = AtomEnsemble::with_profile(g, p, 70.0, &tr()).unwrap();
            assert!((e.od_from_density(&tr()) - 70.0).abs() / 70.0 < 1e-9);
            assert!(e.density().iter().all(|&n| n >= 0.0));
        }
    }

    #[test]
    fn uniform_coherence_counts_atoms() {
        let g = Grid1D::cell_centered(-0.5e-2, 0.5e-2, 100).unwrap();
        let mut e = AtomEnsemble::with_profile(g, DensityProfile::Uniform { length: 2e-2 }, 10.0, &tr()).unwrap();
        let scale = 1e8 / e.atom_number();
        e.density.iter_mut().for_each(|n| *n *= scale);
        let rho = ComplexEnvelope::from_fn(g, Domain::CoherenceInZ, |_| C64::new(1e-3, 0.0));
        let sig = ComplexEnvelope::zeros(Grid1D::new(0.0, 1e-9, 4).unwrap(), Domain::SignalInTime);
        let (n_at, n_ph) = excitation_counts(&rho, &sig, &e, &tr()).unwrap();
        assert!((n_at - 100.0).abs() < 1e-9);
        assert_eq!(n_ph, 0.0);
    }

    #[test]
    fn zero_coherence_gives_zero() {
        let g = Grid1D::cell_centered(0.0, 1.0, 10).unwrap();
        let e = AtomEnsemble::with_profile(g, DensityProfile::Uniform { length: 2.0 }, 1.0, &tr()).unwrap();
        let rho = ComplexEnvelope::zeros(g, Domain::CoherenceInZ);
        let sig = ComplexEnvelope::zeros(Grid1D::new(0.0, 1.0, 3).unwrap(), Domain::SignalInTime);
        assert_eq!(excitation_counts(&rho, &sig, &e, &tr()).unwrap().0, 0.0);
    }

    #[test]
    fn gaussian_pulse_photon_number() {
        // Energy of a Gaussian intensity pulse through the beam area, integrated by the trapezoid rule.
        let t = tr();
        let g = Grid1D::new(-5e-6, 1e-9, 10_001).unwrap();
        let peak = 2.0 * PI * 1e5;
        let sig = ComplexEnvelope::from_fn(g, Domain::SignalInTime, |x| {
            C64::new(peak * (-x * x / (2.0 * (0.5e-6f64).powi(2))).exp(), 0.0)
        });
        let z = Grid1D::cell_centered(0.0, 1.0, 2).unwrap();
        let e = AtomEnsemble::with_profile(z, DensityProfile::Uniform { length: 2.0 }, 0.0, &t).unwrap();
        let rho = ComplexEnvelope::zeros(z, Domain::CoherenceInZ);
        let (_, n_ph) = excitation_counts(&rho, &sig, &e, &t).unwrap();
        let intensity = |w: C64| 0.5 * SI.eps0 * SI.c * (SI.hbar * w.norm() / t.dipole).powi(2);
        let v: Vec<f64> = sig.values().iter().map(|&w| intensity(w)).collect();
        let trap: f64 = v.windows(2).map(|p| 0.5 * (p[0] + p[1]) * g.step()).sum();
        let oracle = trap * e.beam_area() / (SI.hbar * t.omega0);
        assert!((n_ph - oracle).abs() / oracle < 1e-9);
    }

    #[test]
    fn counts_ignore_global_phase() {
        let g = Grid1D::cell_centered(-1.0, 1.0, 16).unwrap();
        let e = AtomEnsemble::with_profile(g, DensityProfile::Gaussian { sigma: 0.4 }, 3.0, &tr()).unwrap();
        let rho = ComplexEnvelope::from_fn(g, Domain::CoherenceInZ, |z| C64::new(z, 0.2));
        let rot = rho.map(|_, v| v * C64::from_polar(1.0, 1.234));
        let sig = ComplexEnvelope::from_fn(Grid1D::new(0.0, 1e-8, 5).unwrap(), Domain::SignalInTime, |t| C64::new(t * 1e8, 1.0));
        let sig_rot = sig.map(|_, v| v * C64::from_polar(1.0, -0.7));
        let a = excitation_counts(&rho, &sig, &e, &tr()).unwrap();
        let b = excitation_counts(&rot, &sig_rot, &e, &tr()).unwrap();
        assert!((a.0 - b.0).abs() <= 1e-15 * a.0);
        assert!((a.1 - b.1).abs() <= 1e-15 * a.1);
    }
}
