//! Wavevector geometry, fictitious magnetic fields and Larmor-precession interference.

use crate::consts::SI;
use crate::{Error, Result, C64};

/// Nominal wavelengths of the write/read (795 nm) and scattered (780 nm) light, nm.
pub const READ_WAVELENGTH_NM: f64 = 795.0;
pub const SCATTER_WAVELENGTH_NM: f64 = 780.0;

/// Residual longitudinal mismatch of the 780/795 nm pair at zero angle, rad/m.
pub const DEFAULT_KZ_OFFSET: f64 = 45.0;

/// Polarizability constant κ reproducing a 20 mG field for a 160 mW/cm² beam
/// detuned by 2π·30 GHz with |g_F| = 1/2.
pub const DEFAULT_KAPPA: f64 = {
    // B·|g_F|·μ_B·Δ·2ħε₀c / I
    let b = 2.0e-6;
    let gf = 0.5;
    let delta = 2.0 * std::f64::consts::PI * 30.0e9;
    let intensity = 1600.0;
    b * gf * SI.mu_b * delta * 2.0 * SI.hbar * SI.eps0 * SI.c / intensity
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveVector3 {
    pub kx: f64,
    pub ky: f64,
    pub kz: f64,
}

impl WaveVector3 {
    pub fn new(kx: f64, ky: f64, kz: f64) -> Result<Self> {
        if !(kx.is_finite() && ky.is_finite() && kz.is_finite()) {
            return Err(Error::param("wavevector", "components must be finite"));
        }
        Ok(Self { kx, ky, kz })
    }

    /// Vector of magnitude `k` tilted by `theta` from +z towards +x.
    pub fn tilted(k: f64, theta: f64) -> Self {
        Self { kx: k * theta.sin(), ky: 0.0, kz: k * theta.cos() }
    }

    pub fn norm(&self) -> f64 {
        (self.kx * self.kx + self.ky * self.ky + self.kz * self.kz).sqrt()
    }

    /// Component perpendicular to z.
    pub fn transverse(&self) -> (f64, f64) {
        (self.kx, self.ky)
    }
}

impl std::ops::Add for WaveVector3 {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self { kx: self.kx + o.kx, ky: self.ky + o.ky, kz: self.kz + o.kz }
    }
}

impl std::ops::Sub for WaveVector3 {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self { kx: self.kx - o.kx, ky: self.ky - o.ky, kz: self.kz - o.kz }
    }
}

/// Circular handedness of the Stark beam.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Handedness {
    SigmaPlus,
    SigmaMinus,
}

impl Handedness {
    fn sign(self) -> f64 {
        match self {
            Handedness::SigmaPlus => 1.0,
            Handedness::SigmaMinus => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FictitiousFieldParams {
    pub handedness: Handedness,
    pub kappa: f64,
    /// Stark-beam detuning Δ_s, rad/s.
    pub detuning_s: f64,
    /// Stark-beam intensity, W/m².
    pub intensity: f64,
    pub g_f: f64,
}

impl FictitiousFieldParams {
    pub fn new(handedness: Handedness, detuning_s: f64, intensity: f64, g_f: f64) -> Result<Self> {
        if detuning_s == 0.0 || !detuning_s.is_finite() {
            return Err(Error::param("detuning_s", "must be finite and non-zero"));
        }
        Ok(Self { handedness, kappa: DEFAULT_KAPPA, detuning_s, intensity, g_f })
    }
}

/// Effective magnetic field of a circularly polarised off-resonant beam, tesla.
pub fn fictitious_field(p: &FictitiousFieldParams) -> Result<f64> {
    if p.g_f == 0.0 {
        return Err(Error::param("g_f", "fictitious field undefined for g_F = 0"));
    }
    if p.detuning_s == 0.0 {
        return Err(Error::param("detuning_s", "must be non-zero"));
    }
    Ok(p.handedness.sign() / (p.g_f * SI.mu_b) * (p.kappa / p.detuning_s) * p.intensity
        / (2.0 * SI.hbar * SI.eps0 * SI.c))
}

/// Larmor angular frequency g_F·μ_B·|B + B_f·b̂|/ħ, with B_f along the external field
/// (along z when the external field vanishes).
pub fn larmor_frequency(b_external: [f64; 3], b_fictitious: f64, g_f: f64) -> f64 {
    let norm = b_external.iter().map(|b| b * b).sum::<f64>().sqrt();
    let axis = if norm > 0.0 { b_external.map(|b| b / norm) } else { [0.0, 0.0, 1.0] };
    let eff: f64 = (0..3)
        .map(|i| (b_external[i] + b_fictitious * axis[i]).powi(2))
        .sum::<f64>()
        .sqrt();
    g_f * SI.mu_b * eff / SI.hbar
}

/// Atoms along z precessing at local Larmor frequencies.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecessionScene {
    density: Vec<f64>,
    larmor: Vec<f64>,
    phase: Vec<f64>,
    step: f64,
}

impl PrecessionScene {
    /// `step` is the quadrature weight of each sample (1 for a discrete staircase).
    pub fn new(density: Vec<f64>, larmor: Vec<f64>, step: f64) -> Result<Self> {
        if density.len() != larmor.len() {
            return Err(Error::DimensionMismatch { expected: density.len(), got: larmor.len() });
        }
        if density.iter().any(|n| !(*n >= 0.0)) {
            return Err(Error::param("density", "must be non-negative"));
        }
        let phase = vec![0.0; density.len()];
        Ok(Self { density, larmor, phase, step })
    }

    /// `groups` equal populations with ω_j = ω₀ + j·Δω.
    pub fn staircase(groups: usize, base: f64, spacing: f64) -> Self {
        let larmor = (0..groups).map(|j| base + j as f64 * spacing).collect();
        Self { density: vec![1.0; groups], larmor, phase: vec![0.0; groups], step: 1.0 }
    }

    /// Adds a phase offset per sample (e.g. an imprinted Stark phase).
    pub fn with_phase(mut self, phase: &[f64]) -> Result<Self> {
        if phase.len() != self.phase.len() {
            return Err(Error::DimensionMismatch { expected: self.phase.len(), got: phase.len() });
        }
        self.phase.iter_mut().zip(phase).for_each(|(p, q)| *p += q);
        Ok(self)
    }

    pub fn density(&self) -> &[f64] {
        &self.density
    }
    pub fn larmor(&self) -> &[f64] {
        &self.larmor
    }

    pub fn total(&self) -> f64 {
        self.density.iter().sum::<f64>() * self.step
    }
}

/// Photodiode signal S(t) = Σ n_j·e^{i(ω_j t + φ_j)}·step.
pub fn precession_signal(scene: &PrecessionScene, times: &[f64]) -> Vec<C64> {
    times
        .iter()
        .map(|&t| {
            scene
                .density
                .iter()
                .zip(&scene.larmor)
                .zip(&scene.phase)
                .map(|((n, w), p)| C64::from_polar(*n, w * t + p))
                .sum::<C64>()
                * scene.step
        })
        .collect()
}

/// Longitudinal phase mismatch of the read-out light scattered at angle `theta`.
pub fn delta_kz(theta: f64, k_in: f64, k_read: f64, offset: f64) -> f64 {
    (1.0 - theta.cos()) * (k_read + k_in) - offset
}

/// Small-angle form of [`delta_kz`].
pub fn delta_kz_quadratic(theta: f64, k_in: f64, k_read: f64, offset: f64) -> f64 {
    0.5 * (k_read + k_in) * theta * theta - offset
}

/// Coupling-beam tilt that cancels the transverse mismatch for light scattered at `theta_write`.
pub fn readout_angle_for_axis(theta_write: f64) -> f64 {
    READ_WAVELENGTH_NM / SCATTER_WAVELENGTH_NM * theta_write
}
