//! Gradient-echo time-lens spectrometer: two-pulse inputs mapped to fringe frequencies.

use std::f64::consts::PI;

use qmemlab::consts::Transition;
use qmemlab::protocols::spectrometer_sweep;
use qmemlab::temporal::{design_report, SpectrometerDesign};

use super::{scaled, Experiment, MHZ, US};
use crate::failure::Failure;
use crate::output::{Artifacts, Trace};
use crate::scenario::{Bounds, Params};

struct Spectrometer {
    design: SpectrometerDesign,
    tr: Transition,
    cells: usize,
    separations: Vec<f64>,
}

pub fn plan(p: &mut Params) -> Result<Box<dyn Experiment>, Failure> {
    let tr = Transition::rb87_d1();
    let design = SpectrometerDesign {
        od: p.real("od", Some(76.0), Bounds::positive(1e4))?,
        beta: p.nonzero("beta_MHz_per_cm", Some(1.7), Bounds::closed(-1e3, 1e3))?,
        cloud_length: p.real("cloud_length_cm", Some(1.0), Bounds::positive(100.0))?,
        chirp: p.nonzero("chirp_MHz_per_us", Some(0.04), Bounds::closed(-1e3, 1e3))?,
        coupling_rabi: p.real("coupling_rabi_MHz", Some(4.7), Bounds::positive(1e4))?,
        detuning: p.nonzero("detuning_MHz", Some(70.0), Bounds::closed(-1e5, 1e5))?,
        gamma: tr.gamma,
        carrier: tr.omega0,
    };
    let cells = p.count("cells", Some(1024), 32, 16384)?;
    let separations = p.list("separations_us", &[3.0, 4.0, 5.0, 6.0, 7.0], Bounds::positive(9.0), 64)?;
    design.validate()?;
    Ok(Box::new(Spectrometer { design, tr, cells, separations }))
}

impl Experiment for Spectrometer {
    fn run(&self, _seed: u64) -> Result<Artifacts, Failure> {
        let report = design_report(&self.design)?;
        let sweep = spectrometer_sweep(&self.design, &self.tr, self.cells, &self.separations)?;
        let mut out = Artifacts::default();
        out.metric("efficiency", sweep.single_efficiency);
        let worst = sweep.fringes.iter().map(|f| (f.measured / f.predicted - 1.0).abs()).fold(0.0, f64::max);
        out.metric("fringe_worst_relative_error", worst);
        out.metric("bandwidth_MHz", report.bandwidth / MHZ);
        out.metric("spin_wave_lifetime_us", report.tau / US);
        out.metric("time_window_us", report.tau_max / US);
        out.metric("resolution_kHz", report.resolution / (2.0 * PI * 1e3));
        out.note("resolution_crossover", report.crossover);
        out.metric("time_lens_focal_s", report.focal);
        out.metric("resolvable_channels", report.pixels);
        out.metric("ideal_efficiency", report.eta0);

        let mut fringes = Trace::new(
            "fringes",
            &["separation[us]", "measured[kHz]", "predicted[kHz]", "ratio[1]", "efficiency[1]"],
        );
        for f in &sweep.fringes {
            fringes.push(vec![f.separation / US, f.measured / 1e3, f.predicted / 1e3, f.measured / f.predicted, f.efficiency]);
        }
        let mut reference = Trace::new("reference_readout", &["time[us]", "intensity[MHz^2]"]);
        let r = &sweep.reference.readout;
        for (t, v) in scaled(r.grid().points(), US).zip(r.values()) {
            reference.push(vec![t, v.norm_sqr() / MHZ.powi(2)]);
        }
        out.traces = vec![fringes, reference];
        Ok(out)
    }
}
