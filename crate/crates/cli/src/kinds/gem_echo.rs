//! Gradient-echo storage of a pulse train with a single gradient reversal.

use qmemlab::consts::Transition;
use qmemlab::ensemble::AtomEnsemble;
use qmemlab::grid::Grid1D;
use qmemlab::protocols::super_gaussian_cloud;
use qmemlab::temporal::{echo_is_time_reversed, find_peaks, kspace_input_correlation, run_gem_echo, GaussianPulse, GemEchoConfig};

use super::{scaled, Experiment, CM, MHZ, US};
use crate::failure::Failure;
use crate::output::{Artifacts, Trace};
use crate::scenario::{Bounds, Params};

struct GemEcho {
    ens: AtomEnsemble,
    tr: Transition,
    cfg: GemEchoConfig,
    tolerance: f64,
    peak_threshold: f64,
}

pub fn plan(p: &mut Params) -> Result<Box<dyn Experiment>, Failure> {
    let tr = Transition::rb87_d1();
    let od = p.real("od", Some(300.0), Bounds::positive(1e4))?;
    let cells = p.count("cells", Some(512), 16, 16384)?;
    let steps = p.count("steps", Some(4000), 10, 1_000_000)?;
    let duration = p.real("duration_us", Some(55.0), Bounds::positive(1e4))?;
    let length = p.real("cloud_length_cm", Some(1.0), Bounds::positive(100.0))?;
    let detuning = p.nonzero("detuning_MHz", Some(60.0), Bounds::closed(-1e5, 1e5))?;
    let rabi = p.real("coupling_rabi_MHz", Some(0.75), Bounds::positive(1e4))?;
    let beta = p.nonzero("beta_MHz_per_cm", Some(1.25), Bounds::closed(-1e3, 1e3))?;
    let flip_time = p.real("flip_us", Some(25.0), Bounds::positive(1e4))?;
    let centers = p.list("pulse_centers_us", &[5.0, 10.0, 17.0], Bounds::closed(0.0, 1e4), 64)?;
    let width = p.real("pulse_width_us", Some(0.7), Bounds::positive(1e3))?;
    let amplitudes = p.list("pulse_amplitudes_MHz", &[0.02, 0.01, 0.015], Bounds::positive(1e3), 64)?;
    let stride = p.count("snapshot_stride", Some(20), 1, 1_000_000)?;
    let lossless = p.flag("lossless", false)?;
    let tolerance = p.real("echo_tolerance_us", Some(0.5), Bounds::positive(1e3))?;
    let peak_threshold = p.real("peak_threshold", Some(0.05), Bounds::positive(1.0))?;
    if centers.len() != amplitudes.len() {
        return Err(Failure::Validation("`pulse_centers_us` and `pulse_amplitudes_MHz` differ in length".into()));
    }
    if centers.iter().any(|&c| c >= flip_time) {
        return Err(Failure::Validation("every pulse must precede `flip_us`".into()));
    }
    if flip_time >= duration {
        return Err(Failure::Validation("`flip_us` must fall inside `duration_us`".into()));
    }
    let ens = super_gaussian_cloud(od, length, cells, &tr)?;
    let pulses = centers.iter().zip(&amplitudes).map(|(&c, &a)| GaussianPulse::new(c, width, a)).collect();
    let cfg = GemEchoConfig {
        detuning,
        rabi,
        beta,
        flip_time,
        pulses,
        time: Grid1D::new(0.0, duration / steps as f64, steps)?,
        lossless,
        snapshot_stride: stride,
    };
    Ok(Box::new(GemEcho { ens, tr, cfg, tolerance, peak_threshold }))
}

impl Experiment for GemEcho {
    fn run(&self, _seed: u64) -> Result<Artifacts, Failure> {
        let cfg = &self.cfg;
        let echo = run_gem_echo(&self.ens, &self.tr, cfg)?;
        let grid = *echo.output.grid();
        let after_flip = grid.nearest(cfg.flip_time);
        let trace: Vec<f64> = echo.output.values()[after_flip..].iter().map(|v| v.norm_sqr()).collect();
        let echo_times: Vec<f64> =
            find_peaks(&trace, self.peak_threshold).into_iter().map(|i| grid.point(i + after_flip)).collect();
        let input_times: Vec<f64> = cfg.pulses.iter().map(|p| p.center).collect();
        let reversed = echo_is_time_reversed(&input_times, &echo_times, cfg.flip_time, self.tolerance);
        let correlation = kspace_input_correlation(&echo.flip_coherence, &echo.input, cfg.beta, cfg.flip_time)?;

        let mut out = Artifacts::default();
        out.note("time-reversed", reversed);
        out.list("input_times_us", &input_times.iter().map(|t| t / US).collect::<Vec<_>>());
        out.list("echo_times_us", &echo_times.iter().map(|t| t / US).collect::<Vec<_>>());
        out.metric("kspace_correlation", correlation);
        out.metric("efficiency", echo.efficiency);
        out.metric("transmitted", echo.transmitted);
        out.note("warnings", echo.warnings.len());

        let mut signal = Trace::new("signal", &["time[us]", "input_intensity[MHz^2]", "output_intensity[MHz^2]"]);
        for (i, t) in scaled(grid.points(), US).enumerate() {
            signal.push(vec![t, echo.input.values()[i].norm_sqr() / MHZ.powi(2), echo.output.values()[i].norm_sqr() / MHZ.powi(2)]);
        }
        let mut flip = Trace::new("flip_coherence", &["z[cm]", "abs[1]", "phase[rad]"]);
        let rho = &echo.flip_coherence;
        for (z, v) in scaled(rho.grid().points(), CM).zip(rho.values()) {
            flip.push(vec![z, v.norm(), v.arg()]);
        }
        let mut kspace = Trace::new("kspace", &["time[us]", "K[rad/cm]", "abs_rho[1]"]);
        let ks: Vec<f64> = echo.kspace.k.points().map(|k| k * CM).collect();
        for (t, row) in echo.kspace.times.iter().zip(&echo.kspace.magnitude) {
            for (k, m) in ks.iter().zip(row) {
                kspace.push(vec![t / US, *k, *m]);
            }
        }
        out.traces = vec![signal, flip, kspace];
        Ok(out)
    }
}
