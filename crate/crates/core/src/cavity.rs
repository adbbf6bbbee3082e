//! Ring-cavity readout of a stored spin wave.
//!
//! A single cavity mode of round-trip length `length` overlaps the cloud. The readout beam
//! converts the coherence into cavity photons, which leak through one mirror. Only the
//! density-weighted uniform component of √n·ρ couples to the cavity field; every other mode
//! of the orthonormal family built by [`mode_decompose`] just suffers power broadening.
//!
//! Level bookkeeping follows [`ExcitedLevel`]: `dipole_ratio` scales the signal (cavity)
//! transition relative to the transition that defines the optical depth, `coupling_ratio`
//! scales the readout transition relative to the one that defines `readout_rabi`.

use std::f64::consts::PI;

use crate::consts::{ExcitedLevel, Transition, SI};
use crate::ensemble::AtomEnsemble;
use crate::grid::{ComplexEnvelope, Domain, EnvelopeKind, Grid1D};
use crate::mb_solver::{run_memory, stark_shift, CouplingDrive, MemoryState, SolverConfig};
use crate::{Error, Result, C64};

const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Rb87 5P₁/₂ hyperfine splitting, rad/s.
pub const D1_EXCITED_SPLITTING: f64 = 2.0 * PI * 814.0e6;

/// Anchor of the thermal-blurring lifetime: 80 μs at 1° and 20 μK on the D1 line.
const THERMAL_ANCHOR_TAU: f64 = 80.0e-6;
const THERMAL_ANCHOR_ANGLE: f64 = PI / 180.0;
const THERMAL_ANCHOR_TEMPERATURE: f64 = 20.0e-6;
const THERMAL_ANCHOR_WAVELENGTH: f64 = 794.978_851e-9;

/// Steps per inverse fastest rate.
const STEP_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct CavityModel {
    /// Round-trip length, m.
    pub length: f64,
    /// Output-mirror intensity transmission.
    pub mirror_transmission: f64,
    /// Readout-beam Rabi frequency on the reference readout transition, rad/s.
    pub readout_rabi: f64,
    /// Excited levels reached by both the cavity field and the readout beam.
    pub levels: Vec<ExcitedLevel>,
    /// Keep the cavity resonant with the loaded-cavity dispersion (drops the atomic phase shift of the field).
    pub dispersion_lock: bool,
    /// Include excited-state decay in every rate.
    pub include_spont_loss: bool,
}

impl CavityModel {
    pub fn new(length: f64, mirror_transmission: f64, readout_rabi: f64, levels: Vec<ExcitedLevel>) -> Result<Self> {
        if !(length > 0.0) || !length.is_finite() {
            return Err(Error::param("length", "must be positive"));
        }
        if !(mirror_transmission > 0.0 && mirror_transmission < 1.0) {
            return Err(Error::param("mirror_transmission", "must lie in (0, 1)"));
        }
        if !(readout_rabi >= 0.0) || !readout_rabi.is_finite() {
            return Err(Error::param("readout_rabi", "must be finite and non-negative"));
        }
        if levels.is_empty() {
            return Err(Error::param("levels", "at least one excited level is required"));
        }
        Ok(Self { length, mirror_transmission, readout_rabi, levels, dispersion_lock: true, include_spont_loss: true })
    }

    /// Rb87 D1 readout: the beam is detuned by `delta_f` from |f⟩ = F'=2 and drives |h⟩→|f⟩;
    /// |e⟩ = F'=1 lies a hyperfine splitting further away. The optical depth refers to |g⟩→|e⟩,
    /// with d_gf/d_ge = −1/√3 and d_he/d_hf = 1/√3.
    pub fn rb87_d1(length: f64, mirror_transmission: f64, readout_rabi: f64, delta_f: f64) -> Result<Self> {
        let r3 = 1.0 / 3f64.sqrt();
        let levels = vec![
            ExcitedLevel::new(delta_f, -r3),
            ExcitedLevel::new(delta_f + D1_EXCITED_SPLITTING, 1.0).with_coupling_ratio(r3),
        ];
        Self::new(length, mirror_transmission, readout_rabi, levels)
    }

    /// Same level structure with the first level's detuning moved to `delta_f`.
    pub fn with_detuning(&self, delta_f: f64) -> Self {
        let shift = delta_f - self.levels[0].detuning;
        let mut m = self.clone();
        for l in &mut m.levels {
            l.detuning += shift;
        }
        m
    }

    pub fn with_readout_rabi(&self, rabi: f64) -> Self {
        Self { readout_rabi: rabi, ..self.clone() }
    }

    pub fn lossless(mut self) -> Self {
        self.include_spont_loss = false;
        self
    }

    fn gamma(&self, tr: &Transition) -> f64 {
        if self.include_spont_loss {
            tr.gamma
        } else {
            0.0
        }
    }

    /// Cavity photon lifetime L/(cT).
    pub fn cavity_lifetime(&self) -> f64 {
        self.length / (SI.c * self.mirror_transmission)
    }

    /// Amplitude leak rate Tc/(2L).
    pub fn leak_rate(&self) -> f64 {
        0.5 * self.mirror_transmission * SI.c / self.length
    }

    /// Field absorption rate per unit optical depth, Σ r²·cΓ²/(L(Γ² + 4Δ²)) (intensity).
    fn absorption_rate_per_od(&self, gamma: f64) -> f64 {
        self.levels
            .iter()
            .map(|l| l.dipole_ratio.powi(2) * SI.c * gamma * gamma / (self.length * (gamma * gamma + 4.0 * l.detuning.powi(2))))
            .sum()
    }

    /// Lifetime of a cavity photon against absorption by a cloud of optical depth `od`.
    pub fn absorption_lifetime(&self, od: f64, tr: &Transition) -> f64 {
        1.0 / (od * self.absorption_rate_per_od(tr.gamma))
    }

    /// Amplitude decay rate of the coherence under the readout beam, |Ω_r|²·Σ s²Γ/(2Γ² + 8Δ²).
    pub fn broadening_rate(&self, tr: &Transition) -> f64 {
        let g = self.gamma(tr);
        self.readout_rabi.powi(2)
            * self
                .levels
                .iter()
                .map(|l| l.coupling_ratio.powi(2) * g / (2.0 * g * g + 8.0 * l.detuning.powi(2)))
                .sum::<f64>()
    }

    /// Σ r·s/(2Δ + iΓ).
    fn exchange_sum(&self, gamma: f64) -> C64 {
        self.levels.iter().map(|l| l.dipole_ratio * l.coupling_ratio / C64::new(2.0 * l.detuning, gamma)).sum()
    }

    /// Σ r²/(2Δ + iΓ).
    fn field_sum(&self, gamma: f64) -> C64 {
        self.levels.iter().map(|l| l.dipole_ratio.powi(2) / C64::new(2.0 * l.detuning, gamma)).sum()
    }

    /// Largest step the integrator accepts for this ensemble.
    pub fn step_bound(&self, ens: &AtomEnsemble, tr: &Transition) -> f64 {
        let gamma = tr.gamma;
        let col = field_coupling(tr, self.length) * ens.column();
        let min_detuning = self.levels.iter().map(|l| l.detuning.abs()).fold(f64::INFINITY, f64::min);
        let dispersion = col * self.levels.iter().map(|l| l.dipole_ratio.powi(2)).sum::<f64>() / (2.0 * min_detuning);
        let broadening = gamma * self.readout_rabi.powi(2) / (8.0 * min_detuning.powi(2));
        let exchange = self.readout_rabi * self.exchange_sum(gamma).norm() * (0.5 * col).sqrt();
        let fastest = [self.leak_rate(), dispersion, broadening, exchange].into_iter().fold(0.0, f64::max);
        STEP_FRACTION / fastest
    }
}

/// ck₀d²/(Lħε₀): converts ∫nρ* dz into a rate of change of the cavity Rabi frequency.
fn field_coupling(tr: &Transition, length: f64) -> f64 {
    SI.c * tr.k0 * tr.dipole.powi(2) / (length * SI.hbar * SI.eps0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CavityState {
    /// Cavity-field Rabi frequency on the reference signal transition, rad/s.
    pub omega_cav: C64,
    pub coherence: ComplexEnvelope,
    /// Photons that have left through the output mirror.
    pub emitted_photons: f64,
    pub time: f64,
}

impl CavityState {
    pub fn new(coherence: ComplexEnvelope, omega_cav: C64) -> Result<Self> {
        if coherence.kind() != EnvelopeKind::Direct(Domain::CoherenceInZ) {
            return Err(Error::param("coherence", "expected a coherence-in-z envelope"));
        }
        Ok(Self { omega_cav, coherence, emitted_photons: 0.0, time: 0.0 })
    }

    /// Empty cavity and a spin wave entirely in the phase-matched mode with amplitude `c0`.
    pub fn matched(ens: &AtomEnsemble, c0: C64) -> Result<Self> {
        let column = ens.column();
        if !(column > 0.0) {
            return Err(Error::param("ens", "no atoms"));
        }
        let rho = c0 / column.sqrt();
        Self::new(ComplexEnvelope::from_fn(*ens.grid(), Domain::CoherenceInZ, |_| rho), C64::new(0.0, 0.0))
    }

    /// Photons currently inside the cavity, over the ensemble's beam area.
    pub fn cavity_photons(&self, model: &CavityModel, ens: &AtomEnsemble, tr: &Transition) -> f64 {
        tr.photon_flux_per_rabi2() * model.length / SI.c * self.omega_cav.norm_sqr() * ens.beam_area()
    }

    pub fn atomic_excitations(&self, ens: &AtomEnsemble) -> f64 {
        ens.atomic_excitations(self.coherence.values())
    }
}

struct Rates {
    /// Self term of the field equation per unit column density.
    field_self: C64,
    /// Multiplies Ω_r·∫nρ* dz in the field equation.
    field_source: C64,
    /// Multiplies (i/2)·Ω_cav*·Ω_r in the coherence equation.
    coherence_source: C64,
    broadening: f64,
    outflux: f64,
}

impl Rates {
    fn new(model: &CavityModel, tr: &Transition) -> Self {
        let gamma = model.gamma(tr);
        let g0 = field_coupling(tr, model.length);
        let exchange = model.exchange_sum(gamma);
        let field = model.field_sum(gamma);
        Rates {
            field_self: -I * g0 * field,
            field_source: -I * g0 * exchange,
            coherence_source: exchange.conj(),
            broadening: model.broadening_rate(tr),
            outflux: model.mirror_transmission * tr.photon_flux_per_rabi2(),
        }
    }
}

struct Derivative {
    omega: C64,
    rho: Vec<C64>,
    photons: f64,
}

/// Right-hand side of the coupled equations at (Ω, ρ).
fn derivative(
    rates: &Rates,
    field_self: C64,
    readout: f64,
    density: &[f64],
    dz: f64,
    area: f64,
    omega: C64,
    rho: &[C64],
) -> Derivative {
    let source: C64 = density.iter().zip(rho).map(|(n, r)| n * r.conj()).sum::<C64>() * dz;
    let d_omega = field_self * omega + rates.field_source * readout * source;
    let drive = 0.5 * I * omega.conj() * readout * rates.coherence_source;
    let d_rho = rho.iter().map(|r| drive - rates.broadening * r).collect();
    Derivative { omega: d_omega, rho: d_rho, photons: rates.outflux * omega.norm_sqr() * area }
}

/// Advance the cavity field and the coherence by one fourth-order Runge–Kutta step.
pub fn evolve_cavity(
    model: &CavityModel,
    state: &CavityState,
    ens: &AtomEnsemble,
    tr: &Transition,
    dt: f64,
) -> Result<CavityState> {
    let bound = model.step_bound(ens, tr);
    if !(dt > 0.0) || dt > bound {
        return Err(Error::StepTooLarge { dt, bound });
    }
    state.coherence.check_same_grid(ens.grid())?;
    let rates = Rates::new(model, tr);
    let mut field_self = rates.field_self * ens.column();
    if model.dispersion_lock {
        field_self.im = 0.0;
    }
    field_self -= model.leak_rate();
    let (density, dz, area) = (ens.density(), ens.grid().step(), ens.beam_area());
    let f = |omega: C64, rho: &[C64]| derivative(&rates, field_self, model.readout_rabi, density, dz, area, omega, rho);
    let shifted = |base: &[C64], d: &Derivative, h: f64| -> Vec<C64> {
        base.iter().zip(&d.rho).map(|(r, dr)| r + dr * h).collect()
    };

    let (w0, r0) = (state.omega_cav, state.coherence.values());
    let k1 = f(w0, r0);
    let k2 = f(w0 + k1.omega * (0.5 * dt), &shifted(r0, &k1, 0.5 * dt));
    let k3 = f(w0 + k2.omega * (0.5 * dt), &shifted(r0, &k2, 0.5 * dt));
    let k4 = f(w0 + k3.omega * dt, &shifted(r0, &k3, dt));

    let sixth = dt / 6.0;
    let omega = w0 + (k1.omega + 2.0 * k2.omega + 2.0 * k3.omega + k4.omega) * sixth;
    let rho: Vec<C64> = (0..r0.len())
        .map(|i| r0[i] + (k1.rho[i] + 2.0 * k2.rho[i] + 2.0 * k3.rho[i] + k4.rho[i]) * sixth)
        .collect();
    let emitted = (k1.photons + 2.0 * k2.photons + 2.0 * k3.photons + k4.photons) * sixth;
    if !omega.norm().is_finite() || rho.iter().any(|r| !r.norm().is_finite()) {
        return Err(Error::NonFinite { slice: 0, last_valid: None });
    }
    Ok(CavityState {
        omega_cav: omega,
        coherence: ComplexEnvelope::direct(*ens.grid(), rho, Domain::CoherenceInZ)?,
        emitted_photons: state.emitted_photons + emitted,
        time: state.time + dt,
    })
}

/// Coefficients of √n·ρ in the orthonormalised family {√n·zᵐ}.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeAmplitudes {
    pub coefficients: Vec<C64>,
    /// u_j sampled on the ensemble grid; u₀ = √n/√N with N = ∫n dz.
    pub basis: Vec<Vec<f64>>,
    /// ∫n|ρ|²dz minus Σ|c_j|²: weight outside the truncated family.
    pub residual: f64,
}

impl ModeAmplitudes {
    /// Largest |⟨u_j, u_k⟩ − δ_jk|.
    pub fn orthonormality_error(&self, dz: f64) -> f64 {
        let mut worst = 0.0f64;
        for (j, u) in self.basis.iter().enumerate() {
            for (k, v) in self.basis.iter().enumerate() {
                let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum::<f64>() * dz;
                let target = if j == k { 1.0 } else { 0.0 };
                worst = worst.max((dot - target).abs());
            }
        }
        worst
    }

    pub fn total_weight(&self) -> f64 {
        self.coefficients.iter().map(|c| c.norm_sqr()).sum()
    }
}

fn orthonormal_family(grid: &Grid1D, density: &[f64], size: usize) -> Result<Vec<Vec<f64>>> {
    let rank = density.iter().filter(|&&n| n > 0.0).count();
    if size == 0 || size > rank {
        return Err(Error::BasisTooLarge { requested: size, rank });
    }
    let dz = grid.step();
    let center = 0.5 * (grid.start() + grid.end());
    let half = 0.5 * grid.span();
    let x: Vec<f64> = grid.points().map(|z| (z - center) / half).collect();
    let root: Vec<f64> = density.iter().map(|n| n.sqrt()).collect();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| p * q).sum::<f64>() * dz;

    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(size);
    for m in 0..size {
        let mut v: Vec<f64> = root.iter().zip(&x).map(|(r, xi)| r * xi.powi(m as i32)).collect();
        let start_norm = dot(&v, &v).sqrt();
        for _pass in 0..2 {
            for u in &basis {
                let p = dot(u, &v);
                v.iter_mut().zip(u).for_each(|(vi, ui)| *vi -= p * ui);
            }
        }
        let norm = dot(&v, &v).sqrt();
        if !(norm > 1e-10 * start_norm) {
            return Err(Error::BasisTooLarge { requested: size, rank: m });
        }
        v.iter_mut().for_each(|vi| *vi /= norm);
        basis.push(v);
    }
    Ok(basis)
}

/// Project √n·ρ onto the first `basis_size` orthonormal modes.
pub fn mode_decompose(rho: &ComplexEnvelope, ens: &AtomEnsemble, basis_size: usize) -> Result<ModeAmplitudes> {
    if rho.kind() != EnvelopeKind::Direct(Domain::CoherenceInZ) {
        return Err(Error::param("rho", "expected a coherence-in-z envelope"));
    }
    rho.check_same_grid(ens.grid())?;
    let basis = orthonormal_family(ens.grid(), ens.density(), basis_size)?;
    let dz = ens.grid().step();
    let weighted: Vec<C64> = ens.density().iter().zip(rho.values()).map(|(n, r)| n.sqrt() * r).collect();
    let coefficients: Vec<C64> =
        basis.iter().map(|u| u.iter().zip(&weighted).map(|(a, w)| a * w).sum::<C64>() * dz).collect();
    let total: f64 = weighted.iter().map(|w| w.norm_sqr()).sum::<f64>() * dz;
    let captured: f64 = coefficients.iter().map(|c| c.norm_sqr()).sum();
    Ok(ModeAmplitudes { coefficients, basis, residual: total - captured })
}

/// Phase-matched amplitude c₀ = ∫n·ρ dz/√N.
pub fn matched_amplitude(rho: &[C64], ens: &AtomEnsemble) -> C64 {
    let dz = ens.grid().step();
    ens.density().iter().zip(rho).map(|(n, r)| n * r).sum::<C64>() * dz / ens.column().sqrt()
}

/// Probability that a cavity photon is absorbed before it leaks out, readout beam off.
pub fn absorption_probability(model: &CavityModel, ens: &AtomEnsemble, tr: &Transition, delta_f: f64) -> f64 {
    let rate_at = ens.od() * model.with_detuning(delta_f).absorption_rate_per_od(tr.gamma);
    let rate_cav = 1.0 / model.cavity_lifetime();
    if rate_at == 0.0 {
        return 0.0;
    }
    rate_at / (rate_at + rate_cav)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LifetimeBudget {
    /// Population lifetime of a spin wave under the readout beam.
    pub tau_broadening: f64,
    /// Blurring time of a spin wave written at angle θ by atomic motion.
    pub tau_thermal: f64,
}

fn thermal_speed(temperature: f64) -> f64 {
    (SI.k_b * temperature / SI.rb87_mass).sqrt()
}

/// Spin-wave lifetimes set by power broadening and by thermal motion at write angle `theta`.
pub fn lifetime_budget(model: &CavityModel, theta: f64, ens: &AtomEnsemble, tr: &Transition) -> Result<LifetimeBudget> {
    if !(theta > 0.0) || !theta.is_finite() {
        return Err(Error::param("theta", "must be positive"));
    }
    let rate = model.broadening_rate(tr);
    let tau_broadening = if rate > 0.0 { 0.5 / rate } else { f64::INFINITY };
    let anchor_k = 2.0 * PI / THERMAL_ANCHOR_WAVELENGTH;
    let calibration =
        THERMAL_ANCHOR_TAU * THERMAL_ANCHOR_ANGLE * anchor_k * thermal_speed(THERMAL_ANCHOR_TEMPERATURE);
    let tau_thermal = calibration / (theta * tr.k0 * thermal_speed(ens.temperature()));
    Ok(LifetimeBudget { tau_broadening, tau_thermal })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReadoutRun {
    /// Emitted photons over initial atomic excitations.
    pub efficiency: f64,
    /// Fraction of an uncoupled spin wave left after the pulse.
    pub survival_offmatched: f64,
    pub times: Vec<f64>,
    /// |c₀(t)/c₀(0)|².
    pub matched_population: Vec<f64>,
    /// Photons inside the cavity.
    pub cavity_photons: Vec<f64>,
    /// Cumulative photons out of the cavity.
    pub emitted: Vec<f64>,
    pub final_state: CavityState,
}

/// Number of samples kept in the traces of a readout run.
const TRACE_POINTS: usize = 2000;

/// Run the readout beam for `duration` starting from an arbitrary coherence and an empty cavity.
pub fn run_readout_from(
    model: &CavityModel,
    ens: &AtomEnsemble,
    tr: &Transition,
    coherence: ComplexEnvelope,
    duration: f64,
) -> Result<ReadoutRun> {
    if !(duration > 0.0) || !duration.is_finite() {
        return Err(Error::param("duration", "must be positive"));
    }
    let mut state = CavityState::new(coherence, C64::new(0.0, 0.0))?;
    state.coherence.check_same_grid(ens.grid())?;
    let initial = state.atomic_excitations(ens);
    if !(initial > 0.0) {
        return Err(Error::ZeroNorm);
    }
    let c0_initial = matched_amplitude(state.coherence.values(), ens).norm_sqr();
    let steps = (duration / model.step_bound(ens, tr)).ceil().max(1.0) as usize;
    let dt = duration / steps as f64;
    let stride = steps.div_ceil(TRACE_POINTS);

    let mut run = ReadoutRun {
        efficiency: 0.0,
        survival_offmatched: 1.0,
        times: Vec::new(),
        matched_population: Vec::new(),
        cavity_photons: Vec::new(),
        emitted: Vec::new(),
        final_state: state.clone(),
    };
    let record = |s: &CavityState, run: &mut ReadoutRun| {
        run.times.push(s.time);
        let c0 = matched_amplitude(s.coherence.values(), ens).norm_sqr();
        run.matched_population.push(if c0_initial > 0.0 { c0 / c0_initial } else { 0.0 });
        run.cavity_photons.push(s.cavity_photons(model, ens, tr));
        run.emitted.push(s.emitted_photons);
    };
    record(&state, &mut run);
    for n in 0..steps {
        state = evolve_cavity(model, &state, ens, tr, dt)?;
        if (n + 1) % stride == 0 || n + 1 == steps {
            record(&state, &mut run);
        }
    }
    run.efficiency = state.emitted_photons / initial;
    run.survival_offmatched = (-2.0 * model.broadening_rate(tr) * duration).exp();
    run.final_state = state;
    Ok(run)
}

/// Readout of a spin wave stored entirely in the phase-matched mode with amplitude `initial_c0`.
pub fn run_readout(
    model: &CavityModel,
    ens: &AtomEnsemble,
    tr: &Transition,
    initial_c0: C64,
    pulse_duration: f64,
) -> Result<ReadoutRun> {
    let state = CavityState::matched(ens, initial_c0)?;
    run_readout_from(model, ens, tr, state.coherence, pulse_duration)
}

/// Spin wave e^{iδk·z} over the ensemble grid with unit amplitude.
pub fn mismatched_spin_wave(ens: &AtomEnsemble, delta_kz: f64) -> ComplexEnvelope {
    ComplexEnvelope::from_fn(*ens.grid(), Domain::CoherenceInZ, |z| C64::from_polar(1.0, delta_kz * z))
}

/// Destruction 1 − ∫n|ρ|dz/∫n|ρ₀|dz of a uniform spin wave under the readout beam without a cavity,
/// from the free-space propagation solver with `time_steps` slices.
pub fn free_space_destruction(
    model: &CavityModel,
    ens: &AtomEnsemble,
    tr: &Transition,
    duration: f64,
    time_steps: usize,
) -> Result<f64> {
    let reference = model.levels[0];
    let signal_tr = Transition::new(reference.dipole_ratio.abs() * tr.dipole, tr.gamma, tr.wavelength())?;
    let sign = reference.dipole_ratio.signum() * reference.coupling_ratio.signum();
    let extra: Vec<ExcitedLevel> = model.levels[1..]
        .iter()
        .map(|l| {
            ExcitedLevel::new(l.detuning, sign * l.dipole_ratio / reference.dipole_ratio.abs())
                .with_coupling_ratio(l.coupling_ratio / reference.coupling_ratio.abs())
        })
        .collect();
    let rabi = model.readout_rabi * reference.coupling_ratio.abs();
    let gamma = model.gamma(tr);
    let stark: f64 = std::iter::once(ExcitedLevel::reference(reference.detuning))
        .chain(extra.iter().copied())
        .map(|l| stark_shift(gamma, rabi * l.coupling_ratio, l.detuning))
        .sum();
    let time = Grid1D::new(0.0, duration / time_steps as f64, time_steps)?;
    let mut cfg = SolverConfig::new(reference.detuning, time);
    cfg.extra_levels = extra;
    cfg.include_spont_loss = model.include_spont_loss;
    let drive = CouplingDrive::new(vec![crate::mb_solver::DriveSegment::new(f64::NEG_INFINITY, C64::new(rabi, 0.0))], stark)?;
    let input = ComplexEnvelope::zeros(time, Domain::SignalInTime);
    let initial = MemoryState::from_fn(ens, 0.0, |_| C64::new(1.0, 0.0));
    let traj = run_memory(ens, &signal_tr, &drive, &input, &cfg, &initial)?;
    let weighted = |rho: &[C64]| ens.density().iter().zip(rho).map(|(n, r)| n * r.norm()).sum::<f64>();
    Ok(1.0 - weighted(traj.final_state.coherence.values()) / weighted(initial.coherence.values()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::DensityProfile;
    use crate::units::{degrees, ghz, mhz};
    use approx::assert_relative_eq;
    use proptest::prelude::{prop_assert, proptest};

    fn uniform_cloud(od: f64, tr: &Transition) -> AtomEnsemble {
        let grid = Grid1D::cell_centered(-1e-2, 1e-2, 256).unwrap();
        AtomEnsemble::with_profile(grid, DensityProfile::Uniform { length: 1e-2 }, od, tr).unwrap()
    }

    fn reference_setup() -> (CavityModel, AtomEnsemble, Transition) {
        let tr = Transition::rb87_d1();
        let model = CavityModel::rb87_d1(0.3, 0.01, mhz(30.0), ghz(1.0)).unwrap();
        (model, uniform_cloud(70.0, &tr), tr)
    }

    fn evolve_for(model: &CavityModel, mut s: CavityState, ens: &AtomEnsemble, tr: &Transition, t: f64) -> CavityState {
        let steps = (t / model.step_bound(ens, tr)).ceil() as usize;
        for _ in 0..steps {
            s = evolve_cavity(model, &s, ens, tr, t / steps as f64).unwrap();
        }
        s
    }

    fn field_only(model: &CavityModel, ens: &AtomEnsemble, tr: &Transition, t: f64) -> f64 {
        let s = CavityState::new(ComplexEnvelope::zeros(*ens.grid(), Domain::CoherenceInZ), C64::new(1.0, 0.0)).unwrap();
        evolve_for(model, s, ens, tr, t).omega_cav.norm_sqr()
    }

    #[test]
    fn constructor_rejects_bad_parameters() {
        assert!(CavityModel::rb87_d1(0.0, 0.01, 1.0, ghz(1.0)).is_err());
        assert!(CavityModel::rb87_d1(0.3, 1.0, 1.0, ghz(1.0)).is_err());
        assert!(CavityModel::rb87_d1(0.3, 0.0, 1.0, ghz(1.0)).is_err());
        assert!(CavityModel::new(0.3, 0.01, 1.0, vec![]).is_err());
    }

    #[test]
    fn empty_cavity_decays_at_mirror_rate() {
        let tr = Transition::rb87_d1();
        let ens = uniform_cloud(0.0, &tr);
        let model = CavityModel::rb87_d1(0.3, 0.01, 0.0, ghz(1.0)).unwrap();
        let t = 0.3e-6;
        let expected = (-t / model.cavity_lifetime()).exp();
        assert_relative_eq!(field_only(&model, &ens, &tr, t), expected, max_relative = 1e-5);
    }

    #[test]
    fn atoms_add_single_photon_absorption() {
        let tr = Transition::rb87_d1();
        let ens = uniform_cloud(70.0, &tr);
        let delta = ghz(1.0);
        let model = CavityModel::new(0.3, 0.01, 0.0, vec![ExcitedLevel::reference(delta)]).unwrap();
        let t = 0.3e-6;
        let tau_at = 4.0 * model.length * delta * delta / (SI.c * tr.gamma * tr.gamma * 70.0);
        let expected = (-t / model.cavity_lifetime() - t / tau_at).exp();
        assert_relative_eq!(field_only(&model, &ens, &tr, t), expected, max_relative = 1e-5);
    }

    #[test]
    fn oversized_step_is_rejected() {
        let (model, ens, tr) = reference_setup();
        let s = CavityState::matched(&ens, C64::new(1.0, 0.0)).unwrap();
        let dt = 2.0 * model.step_bound(&ens, &tr);
        assert!(matches!(evolve_cavity(&model, &s, &ens, &tr, dt), Err(Error::StepTooLarge { .. })));
    }

    #[test]
    fn uniform_coherence_is_pure_fundamental_mode() {
        let tr = Transition::rb87_d1();
        let ens = uniform_cloud(70.0, &tr);
        let r0 = C64::new(0.3, -0.2);
        let rho = ComplexEnvelope::from_fn(*ens.grid(), Domain::CoherenceInZ, |_| r0);
        let m = mode_decompose(&rho, &ens, 6).unwrap();
        assert_relative_eq!((m.coefficients[0] - r0 * ens.column().sqrt()).norm(), 0.0, epsilon = 1e-10 * ens.column().sqrt());
        for c in &m.coefficients[1..] {
            assert!(c.norm() < 1e-10 * ens.column().sqrt());
        }
        assert!(m.orthonormality_error(ens.grid().step()) < 1e-10);
    }

    #[test]
    fn fundamental_weight_matches_direct_overlap() {
        let tr = Transition::rb87_d1();
        let grid = Grid1D::cell_centered(-1e-2, 1e-2, 512).unwrap();
        let ens = AtomEnsemble::with_profile(grid, DensityProfile::Gaussian { sigma: 2e-3 }, 70.0, &tr).unwrap();
        let dk = 40.0 / 1e-2;
        let rho = mismatched_spin_wave(&ens, dk);
        let m = mode_decompose(&rho, &ens, 8).unwrap();
        let dz = grid.step();
        let overlap: C64 = grid.points().zip(ens.density()).map(|(z, n)| n * C64::from_polar(1.0, dk * z)).sum::<C64>() * dz;
        let expected = overlap.norm_sqr() / ens.column();
        assert_relative_eq!(m.coefficients[0].norm_sqr(), expected, max_relative = 1e-8);
        assert!(m.orthonormality_error(dz) < 1e-10);
        let total = ens.atomic_excitations(rho.values()) / ens.beam_area();
        assert_relative_eq!(m.total_weight() + m.residual, total, max_relative = 1e-12);
    }

    #[test]
    fn polynomial_coherence_is_captured_completely() {
        let tr = Transition::rb87_d1();
        let grid = Grid1D::cell_centered(-1e-2, 1e-2, 400).unwrap();
        let ens = AtomEnsemble::with_profile(grid, DensityProfile::SuperGaussian { sigma: 4e-3 }, 30.0, &tr).unwrap();
        let rho = ComplexEnvelope::from_fn(*ens.grid(), Domain::CoherenceInZ, |z| {
            let x = z / 1e-2;
            C64::new(1.0 - 2.0 * x + 3.0 * x * x, x * x * x)
        });
        let m = mode_decompose(&rho, &ens, 4).unwrap();
        let total = ens.atomic_excitations(rho.values()) / ens.beam_area();
        assert!(m.residual.abs() < 1e-8 * total);
    }

    #[test]
    fn basis_larger_than_support_is_rejected() {
        let tr = Transition::rb87_d1();
        let grid = Grid1D::cell_centered(-1e-2, 1e-2, 16).unwrap();
        let ens = AtomEnsemble::with_profile(grid, DensityProfile::Uniform { length: 0.5e-2 }, 10.0, &tr).unwrap();
        let rho = ComplexEnvelope::zeros(grid, Domain::CoherenceInZ);
        assert!(matches!(mode_decompose(&rho, &ens, 17), Err(Error::BasisTooLarge { .. })));
        assert!(mode_decompose(&rho, &ens, 0).is_err());
    }

    #[test]
    fn mismatched_modes_only_broaden() {
        let (model, ens, tr) = reference_setup();
        let rho = mismatched_spin_wave(&ens, 25.0 / 1e-2);
        let before = mode_decompose(&rho, &ens, 6).unwrap();
        let t = 0.5e-6;
        let after_state = evolve_for(&model, CavityState::new(rho, C64::new(0.0, 0.0)).unwrap(), &ens, &tr, t);
        let after = mode_decompose(&after_state.coherence, &ens, 6).unwrap();
        let decay = (-model.broadening_rate(&tr) * t).exp();
        for j in 1..6 {
            let expected = before.coefficients[j] * decay;
            assert!((after.coefficients[j] - expected).norm() < 1e-9 * before.coefficients[j].norm().max(1e-3));
        }
    }

    #[test]
    fn closed_system_conserves_excitations() {
        let tr = Transition::rb87_d1();
        let ens = uniform_cloud(70.0, &tr);
        let model = CavityModel::rb87_d1(0.3, 1e-12, mhz(30.0), ghz(1.0)).unwrap().lossless();
        let mut s = CavityState::matched(&ens, C64::new(1e-3, 0.0)).unwrap();
        let initial = s.atomic_excitations(&ens);
        let steps = 2000;
        let dt = 1e-6 / steps as f64;
        let mut worst = 0.0f64;
        for _ in 0..steps {
            s = evolve_cavity(&model, &s, &ens, &tr, dt).unwrap();
            let total = s.atomic_excitations(&ens) + s.cavity_photons(&model, &ens, &tr) + s.emitted_photons;
            worst = worst.max((total - initial).abs() / initial);
        }
        assert!(worst < 1e-6, "drift {worst}");
        assert!(s.cavity_photons(&model, &ens, &tr) > 1e-3 * initial);
    }

    #[test]
    fn absorption_probability_limits_and_shape() {
        let (model, ens, tr) = reference_setup();
        let empty = uniform_cloud(0.0, &tr);
        assert_eq!(absorption_probability(&model, &empty, &tr, ghz(1.0)), 0.0);
        let leaky = CavityModel::rb87_d1(0.3, 0.999, mhz(30.0), ghz(1.0)).unwrap();
        assert!(absorption_probability(&leaky, &ens, &tr, ghz(1.0)) < 0.02 * absorption_probability(&model, &ens, &tr, ghz(1.0)));
        let curve: Vec<f64> = (0..=140).map(|i| absorption_probability(&model, &ens, &tr, ghz(0.2 + 0.02 * i as f64))).collect();
        assert!(curve.iter().all(|p| (0.0..=1.0).contains(p)));
        assert!(curve.windows(2).all(|w| w[1] < w[0]));
        let tau_at = model.absorption_lifetime(70.0, &tr);
        let tau_cav = model.cavity_lifetime();
        assert_relative_eq!(absorption_probability(&model, &ens, &tr, ghz(1.0)), tau_cav / (tau_at + tau_cav), max_relative = 1e-12);
    }

    #[test]
    fn lifetime_budget_scalings() {
        let (model, ens, tr) = reference_setup();
        let at = |deg: f64| lifetime_budget(&model, degrees(deg), &ens, &tr).unwrap();
        assert_relative_eq!(at(1.0).tau_thermal, 80e-6, max_relative = 1e-12);
        assert_relative_eq!(at(2.0).tau_thermal, 40e-6, max_relative = 1e-12);
        assert_relative_eq!(at(4.0).tau_thermal, 20e-6, max_relative = 1e-12);
        let doubled = lifetime_budget(&model.with_readout_rabi(mhz(60.0)), degrees(1.0), &ens, &tr).unwrap();
        assert_relative_eq!(doubled.tau_broadening, at(1.0).tau_broadening / 4.0, max_relative = 1e-12);
        assert!(lifetime_budget(&model, 0.0, &ens, &tr).is_err());
        let hot = ens.clone().with_temperature(80e-6);
        assert_relative_eq!(lifetime_budget(&model, degrees(1.0), &hot, &tr).unwrap().tau_thermal, 40e-6, max_relative = 1e-12);
    }

    #[test]
    fn broadening_lifetime_oracle() {
        // Independent evaluation at the reference point: levels at 1 GHz and 1.814 GHz.
        let (model, ens, tr) = reference_setup();
        let g = 2.0 * PI * 5.75e6;
        let w = 2.0 * PI * 30e6;
        let (df, de) = (2.0 * PI * 1e9, 2.0 * PI * 1.814e9);
        let rate = g * w * w / (2.0 * g * g + 8.0 * df * df) + g * w * w / (3.0 * (2.0 * g * g + 8.0 * de * de));
        let tau = lifetime_budget(&model, degrees(1.0), &ens, &tr).unwrap().tau_broadening;
        assert_relative_eq!(tau, 0.5 / rate, max_relative = 1e-12);
        assert_relative_eq!(tau, 111.70e-6, max_relative = 1e-3);
    }

    #[test]
    fn reference_readout_reaches_ninety_two_percent() {
        let (model, ens, tr) = reference_setup();
        let run = run_readout(&model, &ens, &tr, C64::new(1.0, 0.0), 1e-6).unwrap();
        assert!((run.efficiency - 0.92).abs() <= 0.02, "efficiency {}", run.efficiency);
        assert!((1.0 - run.survival_offmatched - 0.009).abs() <= 0.001);
        assert!(run.emitted.windows(2).all(|w| w[1] >= w[0]));
        assert!(*run.matched_population.last().unwrap() < 0.05);
    }

    #[test]
    fn unlocked_cavity_is_detuned_by_the_atoms() {
        let (mut model, ens, tr) = reference_setup();
        model.dispersion_lock = false;
        let run = run_readout(&model, &ens, &tr, C64::new(1.0, 0.0), 1e-6).unwrap();
        assert!(run.efficiency < 0.1);
    }

    #[test]
    fn no_readout_beam_reads_nothing() {
        let (model, ens, tr) = reference_setup();
        let run = run_readout(&model.with_readout_rabi(0.0), &ens, &tr, C64::new(1.0, 0.0), 1e-6).unwrap();
        assert_eq!(run.efficiency, 0.0);
        assert_eq!(run.survival_offmatched, 1.0);
    }

    #[test]
    fn readout_is_mode_selective() {
        let (model, ens, tr) = reference_setup();
        let matched = run_readout(&model, &ens, &tr, C64::new(1.0, 0.0), 1e-6).unwrap();
        let off = run_readout_from(&model, &ens, &tr, mismatched_spin_wave(&ens, 10.0 / 1e-2), 1e-6).unwrap();
        assert!(matched.efficiency > 20.0 * off.efficiency, "{} vs {}", matched.efficiency, off.efficiency);
    }

    #[test]
    fn free_space_destruction_is_small() {
        let (model, ens, tr) = reference_setup();
        let d = free_space_destruction(&model, &ens, &tr, 1e-6, 2000).unwrap();
        assert!(d > 1.0 - model.broadening_rate(&tr).mul_add(-1e-6, 1.0) - 1e-4 && d <= 0.02, "destruction {d}");
    }

    proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(24))]
        #[test]
        fn higher_modes_never_grow(dk_l in -60.0f64..60.0, rabi_mhz in 5.0f64..60.0) {
            let (model, ens, tr) = reference_setup();
            let model = model.with_readout_rabi(mhz(rabi_mhz));
            let rho = mismatched_spin_wave(&ens, dk_l / 1e-2);
            let before = mode_decompose(&rho, &ens, 5).unwrap();
            let after_state = evolve_for(&model, CavityState::new(rho, C64::new(0.0, 0.0)).unwrap(), &ens, &tr, 0.1e-6);
            let after = mode_decompose(&after_state.coherence, &ens, 5).unwrap();
            for j in 1..5 {
                prop_assert!(after.coefficients[j].norm() <= before.coefficients[j].norm() * (1.0 + 1e-12) + 1e-12);
            }
        }
    }
}
