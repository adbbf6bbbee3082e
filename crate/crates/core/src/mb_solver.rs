//! Maxwell-Bloch integrator for an off-resonant Λ system in the co-moving frame.
//!
//! The optical coherences are adiabatically eliminated, leaving the ground-state
//! coherence ρ(z, t) and the signal Rabi frequency Ω_s(z, t). Each time slice sweeps
//! the field through the cloud; in every (dt, dz) cell the scaled amplitudes
//! `u_at ∝ √(n dz)·ρ` and `u_ph ∝ √dt·Ω_s*` are mixed by an exact 2×2 rotation, so the
//! lossless scheme conserves `n_at + n_ph` to rounding at any resolution.

use crate::consts::{ExcitedLevel, Transition, SI};
use crate::ensemble::AtomEnsemble;
use crate::grid::{ComplexEnvelope, Domain, EnvelopeKind, Grid1D};
use crate::{Error, Result, C64};

/// Default bound on the per-cell exchange angle.
pub const MAX_CELL_ANGLE: f64 = 0.1;

const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Optical coherences (ρ_ge, ρ_he) slaved to the ground-state coherence at large detuning.
pub fn adiabatic_optical_coherences(
    rho_gh: C64,
    omega_s: C64,
    omega_c: C64,
    delta: f64,
    gamma: f64,
) -> Result<(C64, C64)> {
    if delta == 0.0 {
        return Err(Error::SingularElimination);
    }
    let den = C64::new(2.0 * delta, -gamma);
    let rho_ge = I * (omega_s.conj() + omega_c.conj() * rho_gh) / den;
    let rho_he = I * omega_s.conj() * rho_gh.conj() / den;
    Ok((rho_ge, rho_he))
}

/// Real rotation of the (atom, photon) amplitude pair.
pub fn step_rotation(u_at: C64, u_ph: C64, alpha: f64) -> (C64, C64) {
    let (s, c) = alpha.sin_cos();
    (u_at * c + u_ph * s, u_ph * c - u_at * s)
}

/// One piece of a piecewise-constant coupling drive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriveSegment {
    pub start: f64,
    pub rabi: C64,
    /// Linear sweep of the two-photon detuning, rad/s².
    pub chirp: f64,
    /// Time at which the sweep crosses the base detuning.
    pub chirp_center: f64,
}

impl DriveSegment {
    pub fn new(start: f64, rabi: C64) -> Self {
        Self { start, rabi, chirp: 0.0, chirp_center: start }
    }

    pub fn chirped(start: f64, rabi: C64, chirp: f64, chirp_center: f64) -> Self {
        Self { start, rabi, chirp, chirp_center }
    }
}

/// Coupling field Ω_c(t) and the two-photon detuning it imposes.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingDrive {
    segments: Vec<DriveSegment>,
    pub two_photon_detuning: f64,
}

impl CouplingDrive {
    pub fn new(segments: Vec<DriveSegment>, two_photon_detuning: f64) -> Result<Self> {
        if segments.windows(2).any(|w| !(w[1].start > w[0].start)) {
            return Err(Error::param("drive", "segments must be strictly time-ordered"));
        }
        if segments.iter().any(|s| !s.rabi.norm().is_finite() || !s.chirp.is_finite()) {
            return Err(Error::param("drive", "non-finite Rabi frequency or chirp"));
        }
        Ok(Self { segments, two_photon_detuning })
    }

    pub fn constant(rabi: C64) -> Self {
        Self { segments: vec![DriveSegment::new(f64::NEG_INFINITY, rabi)], two_photon_detuning: 0.0 }
    }

    pub fn off() -> Self {
        Self { segments: Vec::new(), two_photon_detuning: 0.0 }
    }

    pub fn segments(&self) -> &[DriveSegment] {
        &self.segments
    }

    fn segment_at(&self, t: f64) -> Option<&DriveSegment> {
        self.segments.iter().rev().find(|s| s.start <= t)
    }

    pub fn rabi_at(&self, t: f64) -> C64 {
        self.segment_at(t).map_or(C64::new(0.0, 0.0), |s| s.rabi)
    }

    /// Two-photon detuning δ(t) including the chirp ramp.
    pub fn detuning_at(&self, t: f64) -> f64 {
        let ramp = match self.segment_at(t) {
            Some(s) if s.chirp != 0.0 => s.chirp * (t - s.chirp_center),
            _ => 0.0,
        };
        self.two_photon_detuning + ramp
    }

    fn max_rabi(&self) -> f64 {
        self.segments.iter().map(|s| s.rabi.norm()).fold(0.0, f64::max)
    }
}

/// Piecewise-constant longitudinal Zeeman gradient, δ(z) = β·z.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GradientSchedule {
    segments: Vec<(f64, f64)>,
}

impl GradientSchedule {
    /// `(t_start, beta)` pairs; β is in rad/s per metre.
    pub fn new(segments: Vec<(f64, f64)>) -> Result<Self> {
        if segments.windows(2).any(|w| !(w[1].0 > w[0].0)) {
            return Err(Error::param("gradient", "segments must be strictly time-ordered"));
        }
        Ok(Self { segments })
    }

    pub fn constant(beta: f64) -> Self {
        Self { segments: vec![(f64::NEG_INFINITY, beta)] }
    }

    pub fn beta_at(&self, t: f64) -> f64 {
        self.segments.iter().rev().find(|s| s.0 <= t).map_or(0.0, |s| s.1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Splitting {
    #[default]
    Lie,
    Strang,
}

/// How the atom-photon exchange is applied in each cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Exchange {
    /// Exact exponential of the cell coupling (a rotation when lossless).
    #[default]
    Rotation,
    /// First-order expansion `1 + θX`; conserves excitations only as dt, dz → 0.
    FirstOrder,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Single-photon detuning from the reference excited level, rad/s.
    pub detuning: f64,
    /// Further excited levels, with detunings and dipole ratios of their own.
    pub extra_levels: Vec<ExcitedLevel>,
    /// Time slices `t_n`; slice n advances the state from t_n to t_n + dt.
    pub time: Grid1D,
    pub include_spont_loss: bool,
    pub gradient: Option<GradientSchedule>,
    pub splitting: Splitting,
    pub exchange: Exchange,
    /// Store a coherence snapshot every this many slices (0 disables).
    pub snapshot_stride: usize,
    pub max_cell_angle: f64,
}

impl SolverConfig {
    pub fn new(detuning: f64, time: Grid1D) -> Self {
        Self {
            detuning,
            extra_levels: Vec::new(),
            time,
            include_spont_loss: true,
            gradient: None,
            splitting: Splitting::Lie,
            exchange: Exchange::Rotation,
            snapshot_stride: 0,
            max_cell_angle: MAX_CELL_ANGLE,
        }
    }

    pub fn lossless(mut self) -> Self {
        self.include_spont_loss = false;
        self
    }

    pub fn with_gradient(mut self, g: GradientSchedule) -> Self {
        self.gradient = Some(g);
        self
    }

    pub fn with_snapshots(mut self, stride: usize) -> Self {
        self.snapshot_stride = stride;
        self
    }

    fn levels(&self) -> impl Iterator<Item = ExcitedLevel> + '_ {
        std::iter::once(ExcitedLevel::reference(self.detuning)).chain(self.extra_levels.iter().copied())
    }
}

/// Ground-state coherence over z at a given time.
#[derive(Debug, Clone, PartialEq)]
pub struct MemoryState {
    pub coherence: ComplexEnvelope,
    pub time: f64,
}

impl MemoryState {
    pub fn empty(ens: &AtomEnsemble, time: f64) -> Self {
        Self { coherence: ComplexEnvelope::zeros(*ens.grid(), Domain::CoherenceInZ), time }
    }

    pub fn from_fn(ens: &AtomEnsemble, time: f64, f: impl Fn(f64) -> C64) -> Self {
        Self { coherence: ComplexEnvelope::from_fn(*ens.grid(), Domain::CoherenceInZ, f), time }
    }
}

/// Per-slice bookkeeping of excitation numbers.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Diagnostics {
    pub lossless: bool,
    /// Atomic excitations before the first slice.
    pub n_at_initial: f64,
    /// Atomic excitations after each slice.
    pub n_at: Vec<f64>,
    /// Photons entering during each slice.
    pub n_in: Vec<f64>,
    /// Photons leaving during each slice.
    pub n_out: Vec<f64>,
    /// Largest per-cell exchange angle encountered.
    pub max_cell_angle: f64,
    pub warnings: Vec<String>,
}

impl Diagnostics {
    /// Total excitations after each slice: atoms + photons already out + photons still to come.
    pub fn totals(&self) -> Vec<f64> {
        let mut remaining: f64 = self.n_in.iter().sum();
        let mut emitted = 0.0;
        self.n_at
            .iter()
            .zip(self.n_in.iter().zip(&self.n_out))
            .map(|(at, (i, o))| {
                remaining -= i;
                emitted += o;
                at + emitted + remaining
            })
            .collect()
    }

    pub fn initial_total(&self) -> f64 {
        self.n_at_initial + self.n_in.iter().sum::<f64>()
    }

    pub fn emitted(&self) -> f64 {
        self.n_out.iter().sum()
    }

    pub fn injected(&self) -> f64 {
        self.n_in.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub snapshots: Vec<MemoryState>,
    pub output_signal: ComplexEnvelope,
    pub final_state: MemoryState,
    pub diagnostics: Diagnostics,
}

/// Largest relative deviation of `n_at + n_ph` from its initial value.
pub fn conservation_residual(traj: &Trajectory) -> Result<f64> {
    let d = &traj.diagnostics;
    if !d.lossless {
        return Err(Error::LossyDiagnostic);
    }
    let total0 = d.initial_total();
    if total0 == 0.0 {
        return Ok(0.0);
    }
    Ok(d.totals().iter().map(|t| (t - total0).abs() / total0).fold(0.0, f64::max))
}

/// Complex level sums entering the cell update.
#[derive(Debug, Clone, Copy)]
struct LevelSums {
    /// Σ r·s/(2Δ − iΓ): Raman exchange (r signal ratio, s coupling ratio).
    exchange: C64,
    /// Σ r²/(2Δ + iΓ): signal dispersion and absorption.
    field: C64,
    /// Σ s²/(2Δ + iΓ): ac-Stark shift and power broadening of ρ.
    coherence: C64,
}

impl LevelSums {
    fn new(cfg: &SolverConfig, gamma: f64) -> Result<Self> {
        let g = if cfg.include_spont_loss { gamma } else { 0.0 };
        let mut s = LevelSums { exchange: C64::default(), field: C64::default(), coherence: C64::default() };
        for lvl in cfg.levels() {
            if lvl.detuning.abs() < 10.0 * gamma {
                return Err(Error::param("detuning", format!(
                    "|Δ| = {:.3e} rad/s must be at least 10Γ = {:.3e} rad/s",
                    lvl.detuning.abs(),
                    10.0 * gamma
                )));
            }
            let (r, c) = (lvl.dipole_ratio, lvl.coupling_ratio);
            s.exchange += r * c / C64::new(2.0 * lvl.detuning, -g);
            s.field += r * r / C64::new(2.0 * lvl.detuning, g);
            s.coherence += c * c / C64::new(2.0 * lvl.detuning, g);
        }
        Ok(s)
    }
}

/// Integrate the coupled system over `cfg.time`, starting from `initial`.
pub fn run_memory(
    ens: &AtomEnsemble,
    tr: &Transition,
    drive: &CouplingDrive,
    input_signal: &ComplexEnvelope,
    cfg: &SolverConfig,
    initial: &MemoryState,
) -> Result<Trajectory> {
    let zgrid = *ens.grid();
    let nz = zgrid.count();
    let nt = cfg.time.count();
    if input_signal.grid().count() != nt {
        return Err(Error::DimensionMismatch { expected: nt, got: input_signal.grid().count() });
    }
    if input_signal.kind() != EnvelopeKind::Direct(Domain::SignalInTime) {
        return Err(Error::param("input_signal", "expected a signal-in-time envelope"));
    }
    initial.coherence.check_same_grid(&zgrid)?;

    let dt = cfg.time.step();
    let dz = zgrid.step();
    let sums = LevelSums::new(cfg, tr.gamma)?;
    let q = tr.photon_flux_per_rabi2();
    let area = ens.beam_area();

    // Per-cell constants.
    let amp_at: Vec<f64> = ens.density().iter().map(|n| (n * dz).sqrt()).collect();
    let amp_ph = (q * dt).sqrt();
    let half_root: Vec<f64> = ens.density().iter().map(|n| 0.5 * (n * dz * dt / q).sqrt()).collect();
    let kappa = |n: f64| tr.k0 * n * tr.dipole.powi(2) / (SI.hbar * SI.eps0);
    let field_step = |frac: f64| -> Vec<C64> {
        ens.density().iter().map(|&n| (-I * kappa(n) * sums.field * dz * frac).exp()).collect()
    };
    let (field_full, field_half) = (field_step(1.0), field_step(0.5));

    let max_angle = drive.max_rabi() * half_root.iter().fold(0.0f64, |a, &b| a.max(b)) * sums.exchange.norm();
    if max_angle > cfg.max_cell_angle {
        return Err(Error::StabilityBound { angle: max_angle, bound: cfg.max_cell_angle });
    }

    let mut rho = initial.coherence.values().to_vec();
    let mut output = Vec::with_capacity(nt);
    let mut diag = Diagnostics {
        lossless: !cfg.include_spont_loss,
        n_at_initial: ens.atomic_excitations(&rho),
        n_at: Vec::with_capacity(nt),
        n_in: Vec::with_capacity(nt),
        n_out: Vec::with_capacity(nt),
        max_cell_angle: max_angle,
        warnings: Vec::new(),
    };
    let atoms = ens.atom_number();
    let mut snapshots = Vec::new();
    let mut warned_amp = false;
    let mut warned_pop = false;

    // Cached per-cell rotation coefficients for the current drive value.
    let mut cached_rabi = C64::new(f64::NAN, 0.0);
    let mut cos_t = vec![C64::new(1.0, 0.0); nz];
    let mut sin_t = vec![C64::new(0.0, 0.0); nz];
    let mut cached_beta = f64::NAN;
    let mut grad_full = vec![C64::new(1.0, 0.0); nz];
    let mut grad_half = vec![C64::new(1.0, 0.0); nz];
    let zs: Vec<f64> = zgrid.points().collect();
    let strang = cfg.splitting == Splitting::Strang;

    for n in 0..nt {
        let t = cfg.time.point(n);
        let tm = t + 0.5 * dt;
        let rabi = drive.rabi_at(tm);
        if rabi != cached_rabi {
            cached_rabi = rabi;
            for i in 0..nz {
                let theta = sums.exchange * rabi.norm() * half_root[i];
                let (c, s) = match cfg.exchange {
                    Exchange::Rotation => (theta.cos(), theta.sin()),
                    Exchange::FirstOrder => (C64::new(1.0, 0.0), theta),
                };
                cos_t[i] = c;
                sin_t[i] = s;
            }
        }
        let beta = cfg.gradient.as_ref().map_or(0.0, |g| g.beta_at(tm));
        if beta != cached_beta {
            cached_beta = beta;
            for i in 0..nz {
                grad_full[i] = C64::from_polar(1.0, -beta * zs[i] * dt);
                grad_half[i] = C64::from_polar(1.0, -0.5 * beta * zs[i] * dt);
            }
        }
        let delta = drive.detuning_at(tm);
        let rate = -I * delta - 0.5 * I * rabi.norm_sqr() * sums.coherence;
        let phase_unit = (rate * dt).exp();
        let phase_unit_half = (rate * 0.5 * dt).exp();
        let e_phi = if rabi.norm() > 0.0 { rabi / rabi.norm() } else { C64::new(1.0, 0.0) };

        let omega_in = input_signal.values()[n];
        let mut w = omega_in.conj();
        for i in 0..nz {
            if strang {
                rho[i] *= phase_unit_half * grad_half[i];
                w *= field_half[i].conj();
            } else {
                rho[i] *= phase_unit * grad_full[i];
            }
            if amp_at[i] > 0.0 {
                let ratio = amp_ph / amp_at[i];
                let r = rho[i];
                rho[i] = cos_t[i] * r + I * e_phi * sin_t[i] * ratio * w;
                w = I * e_phi.conj() * sin_t[i] * r / ratio + cos_t[i] * w;
            }
            if strang {
                w *= field_half[i].conj();
                rho[i] *= phase_unit_half * grad_half[i];
            } else {
                w *= field_full[i].conj();
            }
        }
        let omega_out = w.conj();
        let n_at = ens.atomic_excitations(&rho);
        if !omega_out.norm().is_finite() || !n_at.is_finite() {
            return Err(Error::NonFinite { slice: n, last_valid: n.checked_sub(1) });
        }
        output.push(omega_out);
        diag.n_at.push(n_at);
        diag.n_in.push(q * omega_in.norm_sqr() * dt * area);
        diag.n_out.push(q * omega_out.norm_sqr() * dt * area);

        if !warned_amp && rho.iter().any(|r| r.norm() > 0.1) {
            warned_amp = true;
            diag.warnings.push(format!("|rho| exceeds 0.1 at t = {:.6e} s (weak-excitation regime)", t + dt));
        }
        if !warned_pop && atoms > 0.0 && n_at / atoms > 0.1 {
            warned_pop = true;
            diag.warnings.push(format!("population transfer exceeds 10% at t = {:.6e} s", t + dt));
        }
        if cfg.snapshot_stride > 0 && (n + 1) % cfg.snapshot_stride == 0 {
            snapshots.push(MemoryState {
                coherence: ComplexEnvelope::direct(zgrid, rho.clone(), Domain::CoherenceInZ)?,
                time: t + dt,
            });
        }
    }

    let output_signal = ComplexEnvelope::direct(cfg.time, output, Domain::SignalInTime)?;
    let final_state = MemoryState {
        coherence: ComplexEnvelope::direct(zgrid, rho, Domain::CoherenceInZ)?,
        time: cfg.time.point(nt - 1) + dt,
    };
    Ok(Trajectory { snapshots, output_signal, final_state, diagnostics: diag })
}

/// Per-cell exchange angle √Γ·|Ω_c|/(4Δ)·√(dOD·dt) in the large-detuning limit.
pub fn cell_angle(gamma: f64, rabi: f64, detuning: f64, d_od: f64, dt: f64) -> f64 {
    gamma.sqrt() * rabi / (4.0 * detuning.abs()) * (d_od * dt).sqrt()
}

/// Power-broadening decay rate of the coherence, (Γ/2)|Ω_c|²/(Γ² + 4Δ²).
pub fn broadening_rate(gamma: f64, rabi: f64, detuning: f64) -> f64 {
    0.5 * gamma * rabi * rabi / (gamma * gamma + 4.0 * detuning * detuning)
}

/// ac-Stark shift of the two-photon resonance, −Δ|Ω_c|²/(Γ² + 4Δ²).
pub fn stark_shift(gamma: f64, rabi: f64, detuning: f64) -> f64 {
    -detuning * rabi * rabi / (gamma * gamma + 4.0 * detuning * detuning)
}

/// Amplitude transmission through optical depth `od` far from resonance.
pub fn amplitude_transmission(gamma: f64, detuning: f64, od: f64) -> f64 {
    (-gamma * gamma * od / (2.0 * gamma * gamma + 8.0 * detuning * detuning)).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::DensityProfile;
    use crate::units::mhz;
    use proptest::prelude::*;

    #[test]
    fn elimination_examples() {
        let z = C64::new(0.0, 0.0);
        let g = 1.0;
        assert_eq!(adiabatic_optical_coherences(z, z, z, 10.0, g).unwrap(), (z, z));
        let (ge, he) = adiabatic_optical_coherences(z, C64::new(g, 0.0), z, 10.0 * g, g).unwrap();
        assert!((ge - I * g / C64::new(20.0 * g, -g)).norm() < 1e-15);
        assert_eq!(he, z);
        assert_eq!(adiabatic_optical_coherences(z, z, z, 0.0, g), Err(Error::SingularElimination));
    }

    proptest! {
        #[test]
        fn elimination_matches_substitution(
            a in -1.0..1.0f64, b in -1.0..1.0f64, c in -5.0..5.0f64, d in -5.0..5.0f64,
            e in -5.0..5.0f64, f in -5.0..5.0f64, delta in 10.0..1000.0f64, gamma in 0.1..1.0f64,
        ) {
            let (rho, ws, wc) = (C64::new(a, b), C64::new(c, d), C64::new(e, f));
            let (ge, he) = adiabatic_optical_coherences(rho, ws, wc, delta, gamma).unwrap();
            // Solve the stationary optical Bloch equations written as den·ρ_ge = i(...).
            let den = C64::new(2.0 * delta, -gamma);
            prop_assert!((ge * den - I * (ws.conj() + wc.conj() * rho)).norm() < 1e-12 * (1.0 + ge.norm() * den.norm()));
            prop_assert!((he * den - I * ws.conj() * rho.conj()).norm() < 1e-12 * (1.0 + he.norm() * den.norm()));
        }

        #[test]
        fn rotation_preserves_norm(a in -1e3..1e3f64, b in -1e3..1e3f64, c in -1e3..1e3f64, d in -1e3..1e3f64, alpha in -10.0..10.0f64) {
            let (u, v) = (C64::new(a, b), C64::new(c, d));
            let (u2, v2) = step_rotation(u, v, alpha);
            let n0 = u.norm_sqr() + v.norm_sqr();
            prop_assert!((u2.norm_sqr() + v2.norm_sqr() - n0).abs() <= 1e-12 * n0.max(1e-300));
        }
    }

    #[test]
    fn rotation_examples() {
        let (one, zero) = (C64::new(1.0, 0.0), C64::new(0.0, 0.0));
        let (a, p) = step_rotation(zero, one, std::f64::consts::FRAC_PI_2);
        assert!((a - one).norm() < 1e-15 && p.norm() < 1e-15);
        let u = (C64::new(0.3, -0.2), C64::new(1.5, 0.7));
        assert_eq!(step_rotation(u.0, u.1, 0.0), u);
        let (a, p) = step_rotation(one, zero, 0.3);
        assert!((a.re - 0.3f64.cos()).abs() < 1e-15 && (p.re + 0.3f64.sin()).abs() < 1e-15);
    }

    fn setup(od: f64, nz: usize) -> (AtomEnsemble, Transition) {
        let tr = Transition::rb87_d1();
        let g = Grid1D::cell_centered(-0.5e-2, 0.5e-2, nz).unwrap();
        (AtomEnsemble::with_profile(g, DensityProfile::Uniform { length: 1e-2 }, od, &tr).unwrap(), tr)
    }

    #[test]
    fn no_coupling_means_no_drift() {
        let (ens, tr) = setup(5.0, 64);
        let tg = Grid1D::new(0.0, 1e-8, 200).unwrap();
        let input = ComplexEnvelope::from_fn(tg, Domain::SignalInTime, |t| C64::new((-(t - 1e-6).powi(2) / 1e-13).exp(), 0.0) * 1e5);
        let cfg = SolverConfig::new(mhz(1000.0), tg).lossless();
        let traj = run_memory(&ens, &tr, &CouplingDrive::off(), &input, &cfg, &MemoryState::empty(&ens, 0.0)).unwrap();
        assert!(conservation_residual(&traj).unwrap() < 1e-13);
    }

    #[test]
    fn lossy_trajectory_rejected_by_diagnostic() {
        let (ens, tr) = setup(5.0, 16);
        let tg = Grid1D::new(0.0, 1e-8, 10).unwrap();
        let input = ComplexEnvelope::zeros(tg, Domain::SignalInTime);
        let cfg = SolverConfig::new(mhz(1000.0), tg);
        let traj = run_memory(&ens, &tr, &CouplingDrive::off(), &input, &cfg, &MemoryState::empty(&ens, 0.0)).unwrap();
        assert_eq!(conservation_residual(&traj), Err(Error::LossyDiagnostic));
    }

    #[test]
    fn stability_bound_enforced() {
        let (ens, tr) = setup(1000.0, 4);
        let tg = Grid1D::new(0.0, 1e-6, 10).unwrap();
        let input = ComplexEnvelope::zeros(tg, Domain::SignalInTime);
        let cfg = SolverConfig::new(mhz(100.0), tg);
        let err = run_memory(&ens, &tr, &CouplingDrive::constant(C64::new(mhz(50.0), 0.0)), &input, &cfg, &MemoryState::empty(&ens, 0.0));
        assert!(matches!(err, Err(Error::StabilityBound { .. })));
    }

    #[test]
    fn small_detuning_rejected() {
        let (ens, tr) = setup(1.0, 4);
        let tg = Grid1D::new(0.0, 1e-8, 4).unwrap();
        let cfg = SolverConfig::new(5.0 * tr.gamma, tg);
        let input = ComplexEnvelope::zeros(tg, Domain::SignalInTime);
        assert!(run_memory(&ens, &tr, &CouplingDrive::off(), &input, &cfg, &MemoryState::empty(&ens, 0.0)).is_err());
    }

    #[test]
    fn cell_angle_matches_solver_angle() {
        let (ens, tr) = setup(20.0, 100);
        let dt = 1e-8;
        let tg = Grid1D::new(0.0, dt, 2).unwrap();
        let delta = mhz(500.0);
        let rabi = mhz(10.0);
        let cfg = SolverConfig::new(delta, tg).lossless();
        let input = ComplexEnvelope::zeros(tg, Domain::SignalInTime);
        let traj = run_memory(&ens, &tr, &CouplingDrive::constant(C64::new(rabi, 0.0)), &input, &cfg, &MemoryState::empty(&ens, 0.0)).unwrap();
        let expected = cell_angle(tr.gamma, rabi, delta, 20.0 / 100.0, dt);
        assert!((traj.diagnostics.max_cell_angle - expected).abs() / expected < 1e-12);
    }

    #[test]
    fn drive_lookup() {
        let d = CouplingDrive::new(
            vec![DriveSegment::new(0.0, C64::new(1.0, 0.0)), DriveSegment::chirped(2.0, C64::new(2.0, 0.0), 3.0, 3.0)],
            0.5,
        )
        .unwrap();
        assert_eq!(d.rabi_at(-1.0), C64::new(0.0, 0.0));
        assert_eq!(d.rabi_at(1.0), C64::new(1.0, 0.0));
        assert_eq!(d.detuning_at(1.0), 0.5);
        assert_eq!(d.detuning_at(4.0), 0.5 + 3.0);
        assert!(CouplingDrive::new(vec![DriveSegment::new(1.0, C64::new(1.0, 0.0)), DriveSegment::new(1.0, C64::new(1.0, 0.0))], 0.0).is_err());
        let g = GradientSchedule::new(vec![(0.0, -1.0), (5.0, 1.0)]).unwrap();
        assert_eq!((g.beta_at(-1.0), g.beta_at(1.0), g.beta_at(6.0)), (0.0, -1.0, 1.0));
    }
}
