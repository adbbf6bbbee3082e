//! Write, dark storage and readout of a single pulse in a uniform cloud.

use qmemlab::consts::Transition;
use qmemlab::ensemble::{AtomEnsemble, DensityProfile};
use qmemlab::grid::Grid1D;
use qmemlab::mb_solver::{cell_angle, Exchange, MAX_CELL_ANGLE};
use qmemlab::protocols::{memory_cycle, CycleConfig};
use qmemlab::temporal::GaussianPulse;

use super::{scaled, Experiment, CM, MHZ, US};
use crate::failure::Failure;
use crate::output::{Artifacts, Trace};
use crate::scenario::{Bounds, Params};

struct MemoryCycle {
    ens: AtomEnsemble,
    tr: Transition,
    cfg: CycleConfig,
}

pub fn plan(p: &mut Params) -> Result<Box<dyn Experiment>, Failure> {
    let tr = Transition::rb87_d1();
    let od = p.real("od", Some(20.0), Bounds::positive(1e4))?;
    let cells = p.count("cells", Some(256), 8, 16384)?;
    let steps = p.count("steps", Some(2000), 10, 1_000_000)?;
    let length = p.real("cloud_length_cm", Some(1.0), Bounds::positive(100.0))?;
    let detuning = p.nonzero("detuning_MHz", Some(100.0), Bounds::closed(-1e5, 1e5))?;
    let rabi = p.real("coupling_rabi_MHz", Some(10.0), Bounds::closed(0.0, 1e4))?;
    let center = p.real("pulse_center_us", Some(1.0), Bounds::closed(0.0, 1e4))?;
    let width = p.real("pulse_width_us", Some(0.2), Bounds::positive(1e3))?;
    let amplitude = p.real("pulse_amplitude_MHz", Some(0.01), Bounds::positive(1e3))?;
    let write_end = p.real("write_end_us", Some(2.0), Bounds::closed(0.0, 1e4))?;
    let read_start = p.real("read_start_us", Some(3.0), Bounds::closed(0.0, 1e4))?;
    let duration = p.real("duration_us", Some(6.0), Bounds::positive(1e4))?;
    let lossless = p.flag("lossless", false)?;
    let exchange = match p.choice("exchange", "rotation", &["rotation", "first-order"])? {
        "rotation" => Exchange::Rotation,
        _ => Exchange::FirstOrder,
    };
    if read_start < write_end {
        return Err(Failure::Validation("`read_start_us` must not precede `write_end_us`".into()));
    }
    if read_start >= duration {
        return Err(Failure::Validation("`read_start_us` must fall inside `duration_us`".into()));
    }
    let dt = duration / steps as f64;
    let angle = cell_angle(tr.gamma, rabi, detuning, od / cells as f64, dt);
    if angle > MAX_CELL_ANGLE {
        return Err(Failure::Validation(format!(
            "cell exchange angle {angle:.3} rad exceeds {MAX_CELL_ANGLE}; raise `steps` or `cells`"
        )));
    }
    let grid = Grid1D::cell_centered(-0.5 * length, 0.5 * length, cells)?;
    let ens = AtomEnsemble::with_profile(grid, DensityProfile::Uniform { length }, od, &tr)?;
    let cfg = CycleConfig {
        detuning,
        rabi,
        pulse: GaussianPulse::new(center, width, amplitude),
        write_end,
        read_start,
        time: Grid1D::new(0.0, dt, steps)?,
        lossless,
        exchange,
    };
    Ok(Box::new(MemoryCycle { ens, tr, cfg }))
}

impl Experiment for MemoryCycle {
    fn run(&self, _seed: u64) -> Result<Artifacts, Failure> {
        let run = memory_cycle(&self.ens, &self.tr, &self.cfg)?;
        let d = &run.trajectory.diagnostics;
        let mut out = Artifacts::default();
        out.metric("efficiency", run.efficiency);
        out.metric("photons_in", d.injected());
        out.metric("photons_out", d.emitted());
        out.metric("atomic_excitations_final", *d.n_at.last().unwrap_or(&0.0));
        if let Some(drift) = run.drift {
            out.metric("conservation_drift", drift);
        }
        out.metric("max_cell_angle_rad", d.max_cell_angle);
        out.note("warnings", d.warnings.len());

        let time = self.cfg.time;
        let mut counts = Trace::new("excitations", &["time[us]", "photons_in[1]", "photons_out[1]", "atoms[1]", "total[1]"]);
        let totals = d.totals();
        for (i, t) in scaled(time.points(), US).enumerate() {
            counts.push(vec![t, d.n_in[i], d.n_out[i], d.n_at[i], totals[i]]);
        }
        let mut fields = Trace::new("signal", &["time[us]", "input_abs[MHz]", "output_abs[MHz]", "output_phase[rad]"]);
        let input = qmemlab::temporal::pulse_train(time, &[self.cfg.pulse]);
        for (i, t) in scaled(time.points(), US).enumerate() {
            let o = run.trajectory.output_signal.values()[i];
            fields.push(vec![t, input.values()[i].norm() / MHZ, o.norm() / MHZ, o.arg()]);
        }
        let mut coherence = Trace::new("final_coherence", &["z[cm]", "re[1]", "im[1]"]);
        let rho = &run.trajectory.final_state.coherence;
        for (z, v) in scaled(rho.grid().points(), CM).zip(rho.values()) {
            coherence.push(vec![z, v.re, v.im]);
        }
        out.traces = vec![counts, fields, coherence];
        Ok(out)
    }
}
