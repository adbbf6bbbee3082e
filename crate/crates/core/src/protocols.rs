//! Canned numerical experiments on the Maxwell–Bloch solver, shared by the scenario
//! runner and the test suites.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::consts::Transition;
use crate::ensemble::AtomEnsemble;
use crate::grid::{ComplexEnvelope, Domain, Grid1D};
use crate::mb_solver::{
    broadening_rate, conservation_residual, run_memory, stark_shift, CouplingDrive, DriveSegment, Exchange,
    MemoryState, SolverConfig, Trajectory,
};
use crate::phase_match::{precession_signal, PrecessionScene};
use crate::ssm::{demodulate, synthesize_fringes, ComplexImage, FringeImage, Image};
use crate::temporal::{
    design_report, fit_lifetime, normalized_fringe_frequency, pulse_train, run_gem_echo, run_spectrometer,
    DesignReport, GaussianPulse, GemEchoConfig, SpectrometerDesign, SpectrometerProtocol, SpectrometerRun,
};
use crate::{Error, Result, C64};

/// Write, dark storage and forward readout of one pulse without a gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct CycleConfig {
    pub detuning: f64,
    pub rabi: f64,
    pub pulse: GaussianPulse,
    /// Coupling switches off here.
    pub write_end: f64,
    /// Coupling switches back on here.
    pub read_start: f64,
    pub time: Grid1D,
    pub lossless: bool,
    pub exchange: Exchange,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CycleResult {
    pub trajectory: Trajectory,
    /// Photons leaving after `read_start` over photons sent in.
    pub efficiency: f64,
    /// Largest relative deviation of n_at + n_ph (lossless runs only).
    pub drift: Option<f64>,
}

pub fn memory_cycle(ens: &AtomEnsemble, tr: &Transition, cfg: &CycleConfig) -> Result<CycleResult> {
    if !(cfg.read_start >= cfg.write_end) {
        return Err(Error::param("read_start", "must not precede write_end"));
    }
    let rabi = C64::new(cfg.rabi, 0.0);
    let gamma = if cfg.lossless { 0.0 } else { tr.gamma };
    let mut segments = vec![DriveSegment::new(f64::NEG_INFINITY, rabi)];
    if cfg.read_start > cfg.write_end {
        segments.push(DriveSegment::new(cfg.write_end, C64::new(0.0, 0.0)));
        segments.push(DriveSegment::new(cfg.read_start, rabi));
    }
    let drive = CouplingDrive::new(segments, stark_shift(gamma, cfg.rabi, cfg.detuning))?;
    let input = pulse_train(cfg.time, &[cfg.pulse]);
    let mut solver = SolverConfig::new(cfg.detuning, cfg.time);
    solver.include_spont_loss = !cfg.lossless;
    solver.exchange = cfg.exchange;
    let trajectory = run_memory(ens, tr, &drive, &input, &solver, &MemoryState::empty(ens, cfg.time.start()))?;
    let d = &trajectory.diagnostics;
    let first_read = cfg.time.nearest(cfg.read_start);
    let injected = d.injected();
    let efficiency = if injected > 0.0 { d.n_out[first_read..].iter().sum::<f64>() / injected } else { 0.0 };
    let drift = if cfg.lossless { Some(conservation_residual(&trajectory)?) } else { None };
    Ok(CycleResult { trajectory, efficiency, drift })
}

/// Amplitude transmission of a weak pulse with the coupling beam off.
pub fn measured_transmission(ens: &AtomEnsemble, tr: &Transition, detuning: f64) -> Result<f64> {
    let time = Grid1D::new(0.0, 1e-8, 64)?;
    let pulse = GaussianPulse::new(0.32e-6, 0.1e-6, 1.0);
    let input = pulse_train(time, &[pulse]);
    let cfg = SolverConfig::new(detuning, time);
    let traj = run_memory(ens, tr, &CouplingDrive::off(), &input, &cfg, &MemoryState::empty(ens, 0.0))?;
    let peak = time.nearest(pulse.center);
    Ok(traj.output_signal.values()[peak].norm() / input.values()[peak].norm())
}

/// Lifetime of a stored spin wave under the coupling beam and its analytic value 1/(2γ).
///
/// The spin wave carries wavevector `k_spin` so that it does not radiate; twenty energies
/// spread over `duration` are fitted with an exponential.
pub fn broadening_lifetime(
    ens: &AtomEnsemble,
    tr: &Transition,
    detuning: f64,
    rabi: f64,
    k_spin: f64,
    duration: f64,
    steps: usize,
) -> Result<(f64, f64)> {
    let time = Grid1D::new(0.0, duration / steps as f64, steps)?;
    let initial = MemoryState::from_fn(ens, 0.0, |z| C64::from_polar(1e-3, k_spin * z));
    let cfg = SolverConfig::new(detuning, time);
    let input = ComplexEnvelope::zeros(time, Domain::SignalInTime);
    let drive = CouplingDrive::constant(C64::new(rabi, 0.0));
    let traj = run_memory(ens, tr, &drive, &input, &cfg, &initial)?;
    let stride = (steps / 20).max(1);
    let (delays, energies): (Vec<f64>, Vec<f64>) = (0..steps)
        .step_by(stride)
        .map(|n| (time.point(n) + time.step(), traj.diagnostics.n_at[n]))
        .unzip();
    let fitted = fit_lifetime(&energies, &delays)?;
    Ok((fitted, 0.5 / broadening_rate(tr.gamma, rabi, detuning)))
}

/// Readout amplitude of the first output sample for spin waves e^{iδk·z}, normalised to δk = 0.
pub fn phase_matching_curve(
    ens: &AtomEnsemble,
    tr: &Transition,
    detuning: f64,
    rabi: f64,
    delta_kz: &[f64],
) -> Result<Vec<f64>> {
    let time = Grid1D::new(0.0, 1e-9, 2)?;
    let cfg = SolverConfig::new(detuning, time).lossless();
    let input = ComplexEnvelope::zeros(time, Domain::SignalInTime);
    let drive = CouplingDrive::constant(C64::new(rabi, 0.0));
    let amplitude = |dk: f64| -> Result<f64> {
        let initial = MemoryState::from_fn(ens, 0.0, |z| C64::from_polar(1e-3, dk * z));
        Ok(run_memory(ens, tr, &drive, &input, &cfg, &initial)?.output_signal.values()[0].norm())
    };
    let reference = amplitude(0.0)?;
    delta_kz.par_iter().map(|&dk| amplitude(dk).map(|a| a / reference)).collect()
}

/// |sinc(x)| with sinc(0) = 1.
pub fn sinc_abs(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        (x.sin() / x).abs()
    }
}

/// Echo efficiency of a uniform cloud at time-bandwidth product `tau_bandwidth`.
///
/// The gradient spans ℬ = 2π·1 MHz over a 1 cm cloud; Ω is set from τ = 4Δ²/(ΓΩ²) at Δ = 2π·60 MHz.
pub fn uniform_echo_efficiency(tr: &Transition, od: f64, tau_bandwidth: f64, lossless: bool) -> Result<f64> {
    let grid = Grid1D::cell_centered(-1e-2, 1e-2, 512)?;
    let ens = AtomEnsemble::with_profile(grid, crate::ensemble::DensityProfile::Uniform { length: 1e-2 }, od, tr)?;
    let band = 2.0 * PI * 1e6;
    let detuning = 2.0 * PI * 60e6;
    let tau = tau_bandwidth / band;
    let rabi = 2.0 * detuning / (tr.gamma * tau).sqrt();
    let cfg = GemEchoConfig {
        detuning,
        rabi,
        beta: band / 1e-2,
        flip_time: 12e-6,
        pulses: vec![GaussianPulse::new(5e-6, 1e-6, 2.0 * PI * 1e4)],
        time: Grid1D::new(0.0, 10e-9, 2400)?,
        lossless,
        snapshot_stride: 0,
    };
    Ok(run_gem_echo(&ens, tr, &cfg)?.efficiency)
}

/// Super-Gaussian cloud of 1 cm FWHM on a ±1 cm grid.
pub fn reference_cloud(od: f64, cells: usize, tr: &Transition) -> Result<AtomEnsemble> {
    super_gaussian_cloud(od, 1e-2, cells, tr)
}

/// Super-Gaussian cloud of the given FWHM on a grid spanning twice that length.
pub fn super_gaussian_cloud(od: f64, fwhm: f64, cells: usize, tr: &Transition) -> Result<AtomEnsemble> {
    if !(fwhm > 0.0) {
        return Err(Error::param("fwhm", "must be positive"));
    }
    let grid = Grid1D::cell_centered(-fwhm, fwhm, cells)?;
    let sigma = 0.5 * fwhm / (4.0 * 2f64.ln()).powf(0.25);
    AtomEnsemble::with_profile(grid, crate::ensemble::DensityProfile::SuperGaussian { sigma }, od, tr)
}

/// Three-pulse gradient echo: Δ = 2π·60 MHz, Ω = 2π·0.75 MHz, β = 2π·1.25 MHz/cm reversed at 25 μs.
pub fn gem_three_pulse(od: f64) -> Result<(AtomEnsemble, Transition, GemEchoConfig)> {
    let tr = Transition::rb87_d1();
    let ens = reference_cloud(od, 512, &tr)?;
    let mhz = |x: f64| 2.0 * PI * x * 1e6;
    let cfg = GemEchoConfig {
        detuning: mhz(60.0),
        rabi: mhz(0.75),
        beta: mhz(1.25) / 1e-2,
        flip_time: 25e-6,
        pulses: vec![
            GaussianPulse::new(5e-6, 0.7e-6, mhz(0.02)),
            GaussianPulse::new(10e-6, 0.7e-6, mhz(0.01)),
            GaussianPulse::new(17e-6, 0.7e-6, mhz(0.015)),
        ],
        time: Grid1D::new(0.0, 55e-6 / 4000.0, 4000)?,
        lossless: false,
        snapshot_stride: 20,
    };
    Ok((ens, tr, cfg))
}

/// Spectrometer operating point: OD 76, Ω = 2π·4.7 MHz, Δ = 2π·70 MHz, β = 2π·1.7 MHz/cm over 1 cm,
/// chirp α = 2π·0.04 MHz/μs.
pub fn reference_spectrometer() -> (SpectrometerDesign, Transition) {
    let tr = Transition::rb87_d1();
    let mhz = |x: f64| 2.0 * PI * x * 1e6;
    let design = SpectrometerDesign {
        beta: mhz(1.7) / 1e-2,
        cloud_length: 1e-2,
        chirp: mhz(0.04) / 1e-6,
        coupling_rabi: mhz(4.7),
        detuning: mhz(70.0),
        gamma: tr.gamma,
        od: 76.0,
        carrier: tr.omega0,
    };
    (design, tr)
}

/// Result of mapping a pair of pulses through the spectrometer.
#[derive(Debug, Clone, PartialEq)]
pub struct FringeMeasurement {
    pub separation: f64,
    /// Fringe frequency of the readout intensity, Hz.
    pub measured: f64,
    /// α·Δt/(2π), Hz.
    pub predicted: f64,
    pub efficiency: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrometerSweep {
    pub fringes: Vec<FringeMeasurement>,
    /// Efficiency of the single-pulse reference run.
    pub single_efficiency: f64,
    pub report: DesignReport,
    pub reference: SpectrometerRun,
}

/// Write window 10 μs at 10 ns steps with 0.3 μs pulses centred at 5 μs.
const SPECTRO_WINDOW: f64 = 10e-6;
const SPECTRO_STEP: f64 = 10e-9;
const SPECTRO_PULSE_WIDTH: f64 = 0.3e-6;
const SPECTRO_MARGIN: f64 = 1e-6;

/// Single pulse as reference, then one pulse pair per separation; fringe frequencies are read
/// from the ratio of each pair trace to the reference.
pub fn spectrometer_sweep(
    design: &SpectrometerDesign,
    tr: &Transition,
    cells: usize,
    separations: &[f64],
) -> Result<SpectrometerSweep> {
    let ens = super_gaussian_cloud(design.od, design.cloud_length, cells, tr)?;
    let report = design_report(design)?;
    let protocol = SpectrometerProtocol::for_design(&report, SPECTRO_WINDOW, SPECTRO_MARGIN);
    let grid = Grid1D::new(0.0, SPECTRO_STEP, (SPECTRO_WINDOW / SPECTRO_STEP).round() as usize)?;
    let amplitude = 2.0 * PI * 1e4;
    let centre = 0.5 * SPECTRO_WINDOW;
    let run = |pulses: &[GaussianPulse]| run_spectrometer(design, &pulse_train(grid, pulses), &ens, tr, &protocol);
    let intensity = |r: &SpectrometerRun| -> Vec<f64> { r.readout.values().iter().map(|v| v.norm_sqr()).collect() };

    let reference = run(&[GaussianPulse::new(centre, SPECTRO_PULSE_WIDTH, amplitude)])?;
    let ref_trace = intensity(&reference);
    let fringes = separations
        .par_iter()
        .map(|&sep| {
            let pair = [
                GaussianPulse::new(centre - 0.5 * sep, SPECTRO_PULSE_WIDTH, amplitude),
                GaussianPulse::new(centre + 0.5 * sep, SPECTRO_PULSE_WIDTH, amplitude),
            ];
            let r = run(&pair)?;
            let predicted = design.chirp.abs() * sep / (2.0 * PI);
            let measured =
                normalized_fringe_frequency(&intensity(&r), &ref_trace, SPECTRO_STEP, 0.2, 0.25 * predicted)?;
            Ok(FringeMeasurement { separation: sep, measured, predicted, efficiency: r.efficiency })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SpectrometerSweep { fringes, single_efficiency: reference.efficiency, report, reference })
}

/// Collapse and revival of the signal from equally populated, equally spaced precession groups.
#[derive(Debug, Clone, PartialEq)]
pub struct RevivalTrace {
    pub times: Vec<f64>,
    pub signal: Vec<C64>,
    /// Closed form |Σ_j e^{ijΔω t}| = |sin(NΔωt/2)/sin(Δωt/2)|.
    pub analytic: Vec<f64>,
    /// min|S|/|S(0)| over the first period.
    pub minimum: f64,
    /// |S(2π/Δω)|/|S(0)|.
    pub revival: f64,
}

/// Samples two revival periods of a `groups`-step staircase with Larmor spacing `spacing`.
pub fn staircase_revival(groups: usize, base: f64, spacing: f64, samples_per_period: usize) -> Result<RevivalTrace> {
    if groups < 2 {
        return Err(Error::param("groups", "need at least two groups"));
    }
    if !(spacing > 0.0) || !spacing.is_finite() {
        return Err(Error::param("spacing", "must be positive"));
    }
    if samples_per_period < 4 {
        return Err(Error::TooFewSamples { needed: 4, got: samples_per_period });
    }
    let period = 2.0 * PI / spacing;
    let times: Vec<f64> =
        (0..=2 * samples_per_period).map(|i| i as f64 * period / samples_per_period as f64).collect();
    let scene = PrecessionScene::staircase(groups, base, spacing);
    let signal = precession_signal(&scene, &times);
    let n = groups as f64;
    let analytic = times
        .iter()
        .map(|t| {
            let half = 0.5 * spacing * t;
            if half.sin().abs() < 1e-12 {
                n
            } else {
                ((n * half).sin() / half.sin()).abs()
            }
        })
        .collect();
    let s0 = signal[0].norm();
    let minimum = signal[..=samples_per_period].iter().map(|s| s.norm()).fold(f64::INFINITY, f64::min) / s0;
    let revival = signal[samples_per_period].norm() / s0;
    Ok(RevivalTrace { times, signal, analytic, minimum, revival })
}

/// Gaussian field of waist `waist` (pixels) centred on a square image, with a phase given in
/// pixel coordinates relative to the centre.
pub fn gaussian_field(size: usize, waist: f64, phase: impl Fn(f64, f64) -> f64) -> ComplexImage {
    let centre = 0.5 * size as f64;
    Image::from_fn(size, size, |r, c| {
        let (x, y) = (c as f64 - centre, r as f64 - centre);
        C64::from_polar((-(x * x + y * y) / (waist * waist)).exp(), phase(x, y))
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FringeRoundTrip {
    pub fringes: FringeImage,
    pub recovered: ComplexImage,
}

/// Synthesizes the fringe image of `field` and demodulates it again.
pub fn fringe_round_trip(field: &ComplexImage, reference_amp: f64, carrier: (f64, f64)) -> Result<FringeRoundTrip> {
    let fringes = synthesize_fringes(field, reference_amp, carrier);
    let recovered = demodulate(&fringes)?;
    Ok(FringeRoundTrip { fringes, recovered })
}

/// Phase jump across the vertical line through the image centre, from the amplitude-weighted
/// mean field on each side; `guard` pixels next to the line are skipped.
pub fn measured_phase_step(field: &ComplexImage, guard: usize) -> f64 {
    let centre = field.cols() / 2;
    let (mut left, mut right) = (C64::new(0.0, 0.0), C64::new(0.0, 0.0));
    for r in 0..field.rows() {
        for (c, v) in field.row(r).iter().enumerate() {
            if c + guard < centre {
                left += v;
            } else if c > centre + guard {
                right += v;
            }
        }
    }
    (right * left.conj()).arg()
}
