//! Temporal-mode optics on stored spin waves.
//!
//! Wigner maps and ray-transfer matrices describe envelopes in phase space; the gradient
//! echo protocols below drive [`crate::mb_solver`] to store, reverse and Fourier-transform
//! optical pulses.

use std::f64::consts::PI;

use rayon::prelude::*;
use rustfft::FftPlanner;

use crate::consts::Transition;
use crate::ensemble::AtomEnsemble;
use crate::fourier::{dft, idft};
use crate::grid::{ComplexEnvelope, Domain, EnvelopeKind, Grid1D};
use crate::mb_solver::{
    broadening_rate, run_memory, stark_shift, CouplingDrive, DriveSegment, GradientSchedule, MemoryState,
    SolverConfig,
};
use crate::ssm::{imprint_phase, linear_fit, StarkMask};
use crate::{Error, Result, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AxisKind {
    Space,
    Time,
}

/// Phase-space quasi-distribution W(x, k), row-major with x as the slow index.
#[derive(Debug, Clone, PartialEq)]
pub struct WignerMap {
    pub values: Vec<f64>,
    pub x: Grid1D,
    pub k: Grid1D,
    pub axis: AxisKind,
}

impl WignerMap {
    pub fn at(&self, ix: usize, ik: usize) -> f64 {
        self.values[ix * self.k.count() + ik]
    }

    /// Σ W·dx·dk.
    pub fn total(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.x.step() * self.k.step()
    }

    /// ∫W dk at each x.
    pub fn marginal_x(&self) -> Vec<f64> {
        self.values.chunks_exact(self.k.count()).map(|row| row.iter().sum::<f64>() * self.k.step()).collect()
    }

    /// ∫W dx at each k.
    pub fn marginal_k(&self) -> Vec<f64> {
        let nk = self.k.count();
        (0..nk).map(|ik| (0..self.x.count()).map(|ix| self.values[ix * nk + ik]).sum::<f64>() * self.x.step()).collect()
    }
}

/// Discrete Wigner function of the L²-normalised envelope.
///
/// Uses lags y = 2mh so both arguments stay on the grid; the k axis then has spacing
/// π/(N·h) and spans the band |k| < π/(2h), where the marginals are exact for envelopes
/// sampled at least twice above their bandwidth.
pub fn wigner(env: &ComplexEnvelope) -> Result<WignerMap> {
    let axis = match env.kind() {
        EnvelopeKind::Direct(Domain::SignalInTime) => AxisKind::Time,
        EnvelopeKind::Direct(_) => AxisKind::Space,
        EnvelopeKind::Spectrum { .. } => {
            return Err(Error::InvalidGrid("Wigner map of a spectrum".into()));
        }
    };
    let a = env.normalized()?;
    let a = a.values();
    let n = a.len();
    let h = env.grid().step();
    let kgrid = Grid1D::centered(PI / (n as f64 * h), n)?;
    let fft = FftPlanner::new().plan_fft_forward(n);
    let half = (n / 2) as i64;
    let scale = 2.0 * h / (2.0 * PI);

    let values: Vec<f64> = (0..n)
        .into_par_iter()
        .flat_map_iter(|j| {
            let mut buf = vec![C64::new(0.0, 0.0); n];
            for m in -half..(n as i64 - half) {
                let (p, q) = (j as i64 + m, j as i64 - m);
                if p >= 0 && q >= 0 && (p as usize) < n && (q as usize) < n {
                    buf[m.rem_euclid(n as i64) as usize] = a[p as usize] * a[q as usize].conj();
                }
            }
            fft.process(&mut buf);
            // Bin p of the transform holds k = signed(p)·π/(N h); reorder onto the centred grid.
            (0..n).map(move |ik| scale * buf[(ik + n - n / 2) % n].re).collect::<Vec<_>>()
        })
        .collect();
    Ok(WignerMap { values, x: *env.grid(), k: kgrid, axis })
}

/// 2×2 ray-transfer matrix acting on (t, ω/ω₀) or (x, k/k₀).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayTransform {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl RayTransform {
    pub const IDENTITY: Self = Self { a: 1.0, b: 0.0, c: 0.0, d: 1.0 };

    /// Thin lens of focal length `f` (infinite focal length is the identity).
    pub fn lens(f: f64) -> Result<Self> {
        if f == 0.0 || f.is_nan() {
            return Err(Error::param("focal", "must be non-zero"));
        }
        Ok(Self { a: 1.0, b: 0.0, c: -1.0 / f, d: 1.0 })
    }

    /// Free propagation (dispersion) over `d`.
    pub fn propagation(d: f64) -> Self {
        Self { a: 1.0, b: d, c: 0.0, d: 1.0 }
    }

    /// Matrix product `self · other` (apply `other` first).
    pub fn compose(&self, other: &Self) -> Self {
        Self {
            a: self.a * other.a + self.b * other.c,
            b: self.a * other.b + self.b * other.d,
            c: self.c * other.a + self.d * other.c,
            d: self.c * other.b + self.d * other.d,
        }
    }

    pub fn determinant(&self) -> f64 {
        self.a * self.d - self.b * self.c
    }

    pub fn apply(&self, x: f64, p: f64) -> (f64, f64) {
        (self.a * x + self.b * p, self.c * x + self.d * p)
    }

    /// Inverse of a unit-determinant matrix.
    pub fn inverse(&self) -> Self {
        Self { a: self.d, b: -self.b, c: -self.c, d: self.a }
    }
}

/// Lens followed by propagation followed by lens, all of focal length `f`.
pub fn far_field(f: f64) -> Result<RayTransform> {
    let l = RayTransform::lens(f)?;
    Ok(l.compose(&RayTransform::propagation(f)).compose(&l))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum QuadraticPhase {
    /// exp(−i·carrier·x²/(2f)) in direct space.
    Lens { focal: f64 },
    /// exp(−i·d·k²/(2·carrier)) in transform space.
    Propagation { distance: f64 },
}

/// Minimum samples per 2π of the applied phase at the edge of the envelope's support.
pub const MIN_POINTS_PER_FRINGE: f64 = 4.0;

pub fn apply_quadratic_phase(env: &ComplexEnvelope, kind: QuadraticPhase, carrier: f64) -> Result<ComplexEnvelope> {
    if !matches!(env.kind(), EnvelopeKind::Direct(_)) {
        return Err(Error::InvalidGrid("quadratic phase expects a direct-space envelope".into()));
    }
    match kind {
        QuadraticPhase::Lens { focal } => {
            if focal == 0.0 || focal.is_nan() {
                return Err(Error::param("focal", "must be non-zero"));
            }
            if focal.is_infinite() {
                return Ok(env.clone());
            }
            let g = env.grid();
            check_alias(carrier * support_edge(g, env.values()) * g.step() / focal.abs())?;
            Ok(env.map(|x, v| v * C64::from_polar(1.0, -carrier * x * x / (2.0 * focal))))
        }
        QuadraticPhase::Propagation { distance } => {
            if distance == 0.0 {
                return Ok(env.clone());
            }
            let spec = dft(env)?;
            let kg = spec.grid();
            check_alias(distance.abs() * support_edge(kg, spec.values()) * kg.step() / carrier.abs())?;
            let spec = spec.map(|k, v| v * C64::from_polar(1.0, -distance * k * k / (2.0 * carrier)));
            idft(&spec)
        }
    }
}

/// Relative amplitude below which samples count as outside the envelope's support.
const SUPPORT_THRESHOLD: f64 = 1e-6;

/// Largest |coordinate| at which the envelope is still significant.
fn support_edge(grid: &Grid1D, values: &[C64]) -> f64 {
    let max = values.iter().map(|v| v.norm()).fold(0.0, f64::max);
    grid.points()
        .zip(values)
        .filter(|(_, v)| v.norm() > SUPPORT_THRESHOLD * max)
        .map(|(x, _)| x.abs())
        .fold(0.0, f64::max)
}

fn check_alias(phase_per_sample: f64) -> Result<()> {
    let points = 2.0 * PI / phase_per_sample;
    if points < MIN_POINTS_PER_FRINGE {
        return Err(Error::Aliasing { points_per_fringe: points });
    }
    Ok(())
}

/// Ideal echo efficiency (1 − e^{−2π·OD/(τℬ)})² of a uniform gradient memory.
pub fn gem_efficiency(od: f64, tau_bandwidth: f64) -> f64 {
    (1.0 - (-2.0 * PI * od / tau_bandwidth).exp()).powi(2)
}

/// Lossless Raman echo efficiency (1 − e^{−(π/2)·OD/(τℬ)})² implied by the solver's equations.
pub fn raman_echo_efficiency(od: f64, tau_bandwidth: f64) -> f64 {
    (1.0 - (-0.5 * PI * od / tau_bandwidth).exp()).powi(2)
}

/// Gradient-echo spectrometer operating point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrometerDesign {
    /// Zeeman gradient, rad/s per m.
    pub beta: f64,
    pub cloud_length: f64,
    /// Two-photon detuning sweep rate α, rad/s².
    pub chirp: f64,
    pub coupling_rabi: f64,
    pub detuning: f64,
    pub gamma: f64,
    pub od: f64,
    /// Optical carrier ω₀, rad/s.
    pub carrier: f64,
}

impl SpectrometerDesign {
    pub fn validate(&self) -> Result<()> {
        if self.beta == 0.0 || !self.beta.is_finite() {
            return Err(Error::param("beta", "must be finite and non-zero"));
        }
        if self.chirp == 0.0 || !self.chirp.is_finite() {
            return Err(Error::param("chirp", "must be finite and non-zero"));
        }
        if !(self.cloud_length > 0.0) {
            return Err(Error::param("cloud_length", "must be positive"));
        }
        if !(self.coupling_rabi > 0.0) || !(self.gamma > 0.0) || self.detuning == 0.0 {
            return Err(Error::param("coupling", "Rabi frequency, Γ and Δ must be non-zero"));
        }
        Ok(())
    }

    /// Spin-wave lifetime 4Δ²/(ΓΩ²) under the coupling beam.
    pub fn lifetime(&self) -> f64 {
        4.0 * self.detuning.powi(2) / (self.gamma * self.coupling_rabi.powi(2))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DesignReport {
    pub bandwidth: f64,
    pub tau: f64,
    pub tau_max: f64,
    /// max(2π·0.89/τ_max, 1/τ), rad/s.
    pub resolution: f64,
    /// Set when the two resolution limits are within a factor of two of each other.
    pub crossover: bool,
    /// Time-lens focal length ω₀/|α|, s.
    pub focal: f64,
    pub pixels: f64,
    pub eta0: f64,
}

pub fn design_report(d: &SpectrometerDesign) -> Result<DesignReport> {
    d.validate()?;
    let bandwidth = (d.beta * d.cloud_length).abs();
    let tau = d.lifetime();
    let tau_max = bandwidth / d.chirp.abs();
    let window_limit = 2.0 * PI * 0.89 / tau_max;
    let decay_limit = 1.0 / tau;
    let ratio = window_limit / decay_limit;
    Ok(DesignReport {
        bandwidth,
        tau,
        tau_max,
        resolution: window_limit.max(decay_limit),
        crossover: (0.5..=2.0).contains(&ratio),
        focal: d.carrier / d.chirp.abs(),
        pixels: tau * bandwidth,
        eta0: gem_efficiency(d.od, tau * bandwidth),
    })
}

/// Mean of η(ω) over its full width at half maximum, and that width.
pub fn mean_efficiency(omega: &[f64], eta: &[f64]) -> Result<(f64, f64)> {
    if omega.len() != eta.len() {
        return Err(Error::DimensionMismatch { expected: omega.len(), got: eta.len() });
    }
    if omega.len() < 3 {
        return Err(Error::TooFewSamples { needed: 3, got: omega.len() });
    }
    let (imax, &peak) = eta.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap();
    if !(peak > 0.0) {
        return Err(Error::ZeroNorm);
    }
    let half = 0.5 * peak;
    let cross = |i: usize, j: usize| omega[i] + (half - eta[i]) / (eta[j] - eta[i]) * (omega[j] - omega[i]);
    let mut lo = imax;
    while lo > 0 && eta[lo - 1] >= half {
        lo -= 1;
    }
    let mut hi = imax;
    while hi + 1 < eta.len() && eta[hi + 1] >= half {
        hi += 1;
    }
    let (left, right) = (
        if lo > 0 { cross(lo - 1, lo) } else { omega[0] },
        if hi + 1 < eta.len() { cross(hi, hi + 1) } else { omega[eta.len() - 1] },
    );
    let mut nodes = vec![(left, half.min(eta[lo]))];
    nodes.extend((lo..=hi).map(|i| (omega[i], eta[i])));
    nodes.push((right, half.min(eta[hi])));
    let area: f64 = nodes.windows(2).map(|w| 0.5 * (w[0].1 + w[1].1) * (w[1].0 - w[0].0)).sum();
    let width = right - left;
    Ok((area / width, width))
}

/// One point of the η̄(ℬ, 1/τ) map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EfficiencyPoint {
    pub bandwidth: f64,
    pub inverse_tau: f64,
    pub mean_eta: f64,
    pub fwhm: f64,
}

/// η̄ over a grid of gradient bandwidths and spin-wave decay rates for a density shape.
///
/// The local efficiency at ω uses the local optical depth per unit bandwidth,
/// η(ω) = (1 − exp(−2π·(dOD/dz)(ω/β)/(τβ)))².
pub fn efficiency_map(
    shape: impl Fn(f64) -> f64 + Sync,
    cloud_length: f64,
    od: f64,
    bandwidths: &[f64],
    inverse_taus: &[f64],
) -> Result<Vec<EfficiencyPoint>> {
    let samples = 801;
    let zs: Vec<f64> = (0..samples).map(|i| (i as f64 / (samples - 1) as f64 - 0.5) * 3.0 * cloud_length).collect();
    let dz = zs[1] - zs[0];
    let norm: f64 = zs.iter().map(|&z| shape(z)).sum::<f64>() * dz;
    if !(norm > 0.0) {
        return Err(Error::ZeroNorm);
    }
    let od_density: Vec<f64> = zs.iter().map(|&z| od * shape(z) / norm).collect();
    let jobs: Vec<(f64, f64)> =
        bandwidths.iter().flat_map(|&b| inverse_taus.iter().map(move |&g| (b, g))).collect();
    jobs.par_iter()
        .map(|&(bandwidth, inverse_tau)| {
            let beta = bandwidth / cloud_length;
            let omega: Vec<f64> = zs.iter().map(|z| beta * z).collect();
            let eta: Vec<f64> =
                od_density.iter().map(|dod| (1.0 - (-2.0 * PI * dod * inverse_tau / beta).exp()).powi(2)).collect();
            let (mean_eta, fwhm) = mean_efficiency(&omega, &eta)?;
            Ok(EfficiencyPoint { bandwidth, inverse_tau, mean_eta, fwhm })
        })
        .collect()
}

/// Spin-wave lifetime from energies sampled at several storage delays.
pub fn fit_lifetime(energies: &[f64], delays: &[f64]) -> Result<f64> {
    if energies.len() != delays.len() {
        return Err(Error::DimensionMismatch { expected: delays.len(), got: energies.len() });
    }
    if energies.len() < 3 {
        return Err(Error::TooFewSamples { needed: 3, got: energies.len() });
    }
    if let Some((index, &value)) = energies.iter().enumerate().find(|(_, e)| !(**e > 0.0)) {
        return Err(Error::NonPositiveSample { index, value });
    }
    let logs: Vec<f64> = energies.iter().map(|e| e.ln()).collect();
    Ok(-1.0 / linear_fit(delays, &logs).0)
}

/// Gaussian signal pulse (Rabi-frequency units).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianPulse {
    pub center: f64,
    /// Amplitude standard deviation, s.
    pub width: f64,
    pub amplitude: f64,
    /// Carrier offset from two-photon resonance, rad/s.
    pub offset: f64,
}

impl GaussianPulse {
    pub fn new(center: f64, width: f64, amplitude: f64) -> Self {
        Self { center, width, amplitude, offset: 0.0 }
    }

    pub fn eval(&self, t: f64) -> C64 {
        let x = (t - self.center) / self.width;
        C64::from_polar(self.amplitude * (-0.5 * x * x).exp(), self.offset * (t - self.center))
    }
}

pub fn pulse_train(grid: Grid1D, pulses: &[GaussianPulse]) -> ComplexEnvelope {
    ComplexEnvelope::from_fn(grid, Domain::SignalInTime, |t| pulses.iter().map(|p| p.eval(t)).sum())
}

/// |ρ̃(K)| snapshots over a run.
#[derive(Debug, Clone, PartialEq)]
pub struct KSpaceHistory {
    pub times: Vec<f64>,
    pub k: Grid1D,
    pub magnitude: Vec<Vec<f64>>,
}

impl KSpaceHistory {
    fn new(zgrid: &Grid1D) -> Self {
        Self { times: Vec::new(), k: zgrid.conjugate(), magnitude: Vec::new() }
    }

    fn push(&mut self, state: &MemoryState) -> Result<()> {
        let spec = dft(&state.coherence)?;
        self.times.push(state.time);
        self.magnitude.push(spec.values().iter().map(|v| v.norm()).collect());
        Ok(())
    }
}

/// Gradient-echo store-and-recall of a pulse train under constant coupling.
#[derive(Debug, Clone, PartialEq)]
pub struct GemEchoConfig {
    pub detuning: f64,
    pub rabi: f64,
    /// Write gradient; it is reversed at `flip_time`.
    pub beta: f64,
    pub flip_time: f64,
    pub pulses: Vec<GaussianPulse>,
    pub time: Grid1D,
    pub lossless: bool,
    pub snapshot_stride: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GemEcho {
    pub input: ComplexEnvelope,
    pub output: ComplexEnvelope,
    pub flip_coherence: ComplexEnvelope,
    pub kspace: KSpaceHistory,
    /// Photons emitted after the flip over photons sent in.
    pub efficiency: f64,
    /// Photons leaving before the flip over photons sent in.
    pub transmitted: f64,
    pub warnings: Vec<String>,
}

pub fn run_gem_echo(ens: &AtomEnsemble, tr: &Transition, cfg: &GemEchoConfig) -> Result<GemEcho> {
    let gamma = if cfg.lossless { 0.0 } else { tr.gamma };
    let mut drive = CouplingDrive::new(vec![DriveSegment::new(f64::NEG_INFINITY, C64::new(cfg.rabi, 0.0))], 0.0)?;
    drive.two_photon_detuning = stark_shift(gamma, cfg.rabi, cfg.detuning);
    let input = pulse_train(cfg.time, &cfg.pulses);
    let nf = cfg.time.nearest(cfg.flip_time);
    let flip_time = cfg.time.point(nf);

    let mut solver = SolverConfig::new(cfg.detuning, Grid1D::new(cfg.time.start(), cfg.time.step(), nf)?)
        .with_gradient(GradientSchedule::constant(-cfg.beta))
        .with_snapshots(cfg.snapshot_stride);
    solver.include_spont_loss = !cfg.lossless;
    let write_in = ComplexEnvelope::direct(solver.time, input.values()[..nf].to_vec(), Domain::SignalInTime)?;
    let write = run_memory(ens, tr, &drive, &write_in, &solver, &MemoryState::empty(ens, cfg.time.start()))?;

    let read_grid = Grid1D::new(flip_time, cfg.time.step(), cfg.time.count() - nf)?;
    let read_in = ComplexEnvelope::direct(read_grid, input.values()[nf..].to_vec(), Domain::SignalInTime)?;
    solver.time = read_grid;
    solver.gradient = Some(GradientSchedule::constant(cfg.beta));
    let read = run_memory(ens, tr, &drive, &read_in, &solver, &write.final_state)?;

    let mut kspace = KSpaceHistory::new(ens.grid());
    for s in write.snapshots.iter().chain(&read.snapshots) {
        kspace.push(s)?;
    }
    let injected = write.diagnostics.injected() + read.diagnostics.injected();
    let mut out = write.output_signal.into_values();
    out.extend_from_slice(read.output_signal.values());
    let efficiency = read.diagnostics.emitted() / injected;
    let transmitted = write.diagnostics.emitted() / injected;
    let mut warnings = write.diagnostics.warnings;
    warnings.extend(read.diagnostics.warnings);
    Ok(GemEcho {
        input,
        output: ComplexEnvelope::direct(cfg.time, out, Domain::SignalInTime)?,
        flip_coherence: write.final_state.coherence,
        kspace,
        efficiency,
        transmitted,
        warnings,
    })
}

/// Indices of local maxima of `trace` exceeding `min_rel` of its global maximum.
pub fn find_peaks(trace: &[f64], min_rel: f64) -> Vec<usize> {
    let max = trace.iter().copied().fold(0.0f64, f64::max);
    if trace.len() < 3 || !(max > 0.0) {
        return Vec::new();
    }
    (1..trace.len() - 1)
        .filter(|&i| trace[i] >= min_rel * max && trace[i] > trace[i - 1] && trace[i] >= trace[i + 1])
        .collect()
}

/// True when the echo peaks appear in the reverse order of the input pulses,
/// each near the mirror time 2·T_flip − t_in (within `tolerance`).
pub fn echo_is_time_reversed(input_times: &[f64], echo_times: &[f64], flip_time: f64, tolerance: f64) -> bool {
    if input_times.len() != echo_times.len() || input_times.is_empty() {
        return false;
    }
    let strictly_increasing = |v: &[f64]| v.windows(2).all(|w| w[1] > w[0]);
    if !strictly_increasing(input_times) || !strictly_increasing(echo_times) {
        return false;
    }
    input_times
        .iter()
        .rev()
        .zip(echo_times)
        .all(|(t_in, t_out)| (t_out - (2.0 * flip_time - t_in)).abs() <= tolerance)
}

/// Largest normalised cross-correlation Σf·g(·+lag)/(|f||g|) over |lag| ≤ `max_lag`.
pub fn peak_cross_correlation(f: &[f64], g: &[f64], max_lag: usize) -> f64 {
    let nf = f.iter().map(|v| v * v).sum::<f64>().sqrt();
    let ng = g.iter().map(|v| v * v).sum::<f64>().sqrt();
    if nf == 0.0 || ng == 0.0 {
        return 0.0;
    }
    let n = f.len().min(g.len()) as i64;
    (-(max_lag as i64)..=max_lag as i64)
        .map(|lag| {
            (0..n)
                .filter_map(|i| {
                    let j = i + lag;
                    (0..n).contains(&j).then(|| f[i as usize] * g[j as usize])
                })
                .sum::<f64>()
                / (nf * ng)
        })
        .fold(f64::MIN, f64::max)
}

/// Compares |ρ̃(K)| at the flip with the input envelope mapped through t = T_flip − K/β.
pub fn kspace_input_correlation(
    flip_coherence: &ComplexEnvelope,
    input: &ComplexEnvelope,
    beta: f64,
    flip_time: f64,
) -> Result<f64> {
    let spec = dft(flip_coherence)?;
    let kg = *spec.grid();
    let tg = input.grid();
    let rho_k: Vec<f64> = spec.values().iter().map(|v| v.norm()).collect();
    let mapped: Vec<f64> = kg
        .points()
        .map(|k| {
            let t = flip_time - k / beta.abs();
            interpolate(tg, input.values(), t).norm()
        })
        .collect();
    Ok(peak_cross_correlation(&rho_k, &mapped, 2))
}

fn interpolate(grid: &Grid1D, values: &[C64], x: f64) -> C64 {
    let s = (x - grid.start()) / grid.step();
    if s < 0.0 || s > (grid.count() - 1) as f64 {
        return C64::new(0.0, 0.0);
    }
    let i = (s.floor() as usize).min(grid.count() - 2);
    let w = s - i as f64;
    values[i] * (1.0 - w) + values[i + 1] * w
}

/// Stage timings of the spectrometer run. The write stage uses the input's time grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrometerProtocol {
    /// Coupling-off storage under the write gradient, s.
    pub store_duration: f64,
    /// Readout duration after the gradient flip, s.
    pub read_duration: f64,
    pub snapshot_stride: usize,
    pub lossless: bool,
    /// Time at which the chirped two-photon detuning crosses its base value;
    /// `None` uses the centre of the write window.
    pub lens_center: Option<f64>,
}

impl SpectrometerProtocol {
    /// Storage long enough for every Fresnel-propagated component to reach positive K
    /// (plus `margin`, s), and a readout covering the full time-to-frequency window.
    pub fn for_design(report: &DesignReport, write_duration: f64, margin: f64) -> Self {
        let store = (0.5 * report.tau_max - 0.5 * write_duration).max(0.0) + margin;
        Self {
            store_duration: store,
            read_duration: report.tau_max + 2.0 * margin,
            snapshot_stride: 0,
            lossless: false,
            lens_center: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrometerRun {
    pub readout: ComplexEnvelope,
    pub kspace_history: KSpaceHistory,
    pub efficiency: f64,
    pub report: DesignReport,
    pub warnings: Vec<String>,
}

/// Chirped write under −β, dark storage with the Fresnel phase exp(−iβ²z²/(2α)), unchirped
/// readout under +β. The input's grid defines the write stage.
pub fn run_spectrometer(
    design: &SpectrometerDesign,
    input: &ComplexEnvelope,
    ens: &AtomEnsemble,
    tr: &Transition,
    protocol: &SpectrometerProtocol,
) -> Result<SpectrometerRun> {
    let report = design_report(design)?;
    let gamma = if protocol.lossless { 0.0 } else { tr.gamma };
    let rabi = C64::new(design.coupling_rabi, 0.0);
    let stark = stark_shift(gamma, design.coupling_rabi, design.detuning);
    let wgrid = *input.grid();
    let dt = wgrid.step();
    let mut history = KSpaceHistory::new(ens.grid());
    let mut warnings = Vec::new();

    let mut cfg = SolverConfig::new(design.detuning, wgrid)
        .with_gradient(GradientSchedule::constant(-design.beta))
        .with_snapshots(protocol.snapshot_stride);
    cfg.include_spont_loss = !protocol.lossless;
    let lens_center = protocol.lens_center.unwrap_or(0.5 * (wgrid.start() + wgrid.end()));
    let write_drive = CouplingDrive::new(
        vec![DriveSegment::chirped(f64::NEG_INFINITY, rabi, -design.chirp, lens_center)],
        stark,
    )?;
    let write = run_memory(ens, tr, &write_drive, input, &cfg, &MemoryState::empty(ens, wgrid.start()))?;
    let injected = write.diagnostics.injected();
    warnings.extend(write.diagnostics.warnings.iter().cloned());
    for s in &write.snapshots {
        history.push(s)?;
    }

    let mut state = write.final_state;
    let store_steps = (protocol.store_duration / dt).round() as usize;
    if store_steps > 0 {
        cfg.time = Grid1D::new(state.time, dt, store_steps)?;
        let dark = ComplexEnvelope::zeros(cfg.time, Domain::SignalInTime);
        let store = run_memory(ens, tr, &CouplingDrive::off(), &dark, &cfg, &state)?;
        for s in &store.snapshots {
            history.push(s)?;
        }
        state = store.final_state;
    }
    let fresnel: Vec<f64> =
        ens.grid().points().map(|z| -design.beta.powi(2) * z * z / (2.0 * design.chirp)).collect();
    state = imprint_phase(&state, &StarkMask::from_phase_profile(&fresnel)?, 0)?;
    history.push(&state)?;

    let read_steps = (protocol.read_duration / dt).round().max(1.0) as usize;
    cfg.time = Grid1D::new(state.time, dt, read_steps)?;
    cfg.gradient = Some(GradientSchedule::constant(design.beta));
    let read_drive = CouplingDrive::new(vec![DriveSegment::new(f64::NEG_INFINITY, rabi)], stark)?;
    let dark = ComplexEnvelope::zeros(cfg.time, Domain::SignalInTime);
    let read = run_memory(ens, tr, &read_drive, &dark, &cfg, &state)?;
    warnings.extend(read.diagnostics.warnings.iter().cloned());
    for s in &read.snapshots {
        history.push(s)?;
    }
    let efficiency = if injected > 0.0 { read.diagnostics.emitted() / injected } else { 0.0 };
    Ok(SpectrometerRun { readout: read.output_signal, kspace_history: history, efficiency, report, warnings })
}

/// Dominant fringe frequency (cycles/s) of an intensity trace sampled every `dt`,
/// ignoring frequencies below `min_freq`.
pub fn fringe_frequency(trace: &[f64], dt: f64, min_freq: f64) -> Result<f64> {
    if trace.len() < 8 {
        return Err(Error::TooFewSamples { needed: 8, got: trace.len() });
    }
    let mean = trace.iter().sum::<f64>() / trace.len() as f64;
    let pad = (16 * trace.len()).next_power_of_two();
    let mut buf: Vec<C64> = trace.iter().map(|v| C64::new(v - mean, 0.0)).collect();
    buf.resize(pad, C64::new(0.0, 0.0));
    FftPlanner::new().plan_fft_forward(pad).process(&mut buf);
    let df = 1.0 / (pad as f64 * dt);
    let start = (min_freq / df).ceil().max(1.0) as usize;
    let spectrum: Vec<f64> = buf[..pad / 2].iter().map(|v| v.norm()).collect();
    let i = (start..pad / 2 - 1)
        .max_by(|&a, &b| spectrum[a].total_cmp(&spectrum[b]))
        .ok_or(Error::TooFewSamples { needed: start + 2, got: pad / 2 })?;
    let (l, c, r) = (spectrum[i - 1], spectrum[i], spectrum[i + 1]);
    let denom = l - 2.0 * c + r;
    let shift = if denom != 0.0 { 0.5 * (l - r) / denom } else { 0.0 };
    Ok((i as f64 + shift) * df)
}

/// Fringe frequency of `trace` after dividing out the single-pulse envelope
/// `reference`, using only samples where the reference exceeds `floor` of its peak.
pub fn normalized_fringe_frequency(trace: &[f64], reference: &[f64], dt: f64, floor: f64, min_freq: f64) -> Result<f64> {
    if trace.len() != reference.len() {
        return Err(Error::DimensionMismatch { expected: trace.len(), got: reference.len() });
    }
    let peak = reference.iter().copied().fold(0.0, f64::max);
    let keep: Vec<usize> = (0..trace.len()).filter(|&i| reference[i] > floor * peak).collect();
    let (Some(&first), Some(&last)) = (keep.first(), keep.last()) else {
        return Err(Error::TooFewSamples { needed: 8, got: 0 });
    };
    let ratio: Vec<f64> = (first..=last).map(|i| trace[i] / reference[i].max(floor * peak)).collect();
    fringe_frequency(&ratio, dt, min_freq)
}

/// Energy-decay rate of a stored spin wave under the coupling beam, 2γ.
pub fn energy_decay_rate(gamma: f64, rabi: f64, detuning: f64) -> f64 {
    2.0 * broadening_rate(gamma, rabi, detuning)
}
