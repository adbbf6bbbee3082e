//! Ring-cavity readout of a phase-matched spin wave: efficiency, mode selectivity,
//! photon absorption probability and spin-wave lifetime budget.

use qmemlab::cavity::{
    absorption_probability, free_space_destruction, lifetime_budget, mismatched_spin_wave, run_readout,
    run_readout_from, CavityModel,
};
use qmemlab::consts::Transition;
use qmemlab::ensemble::{AtomEnsemble, DensityProfile};
use qmemlab::grid::Grid1D;
use qmemlab::C64;

use super::{Experiment, US};
use crate::failure::Failure;
use crate::output::{Artifacts, Trace};
use crate::scenario::{Bounds, Params};

const GHZ: f64 = 2.0 * std::f64::consts::PI * 1e9;

struct CavityReadout {
    model: CavityModel,
    ens: AtomEnsemble,
    tr: Transition,
    pulse: f64,
    theta: f64,
    mismatch: f64,
    sweep: Vec<f64>,
    free_space_steps: usize,
}

pub fn plan(p: &mut Params) -> Result<Box<dyn Experiment>, Failure> {
    let tr = Transition::rb87_d1();
    let length = p.real("cavity_length_cm", Some(30.0), Bounds::positive(1e4))?;
    let transmission = p.real("mirror_transmission", Some(0.01), Bounds::positive(0.999))?;
    let rabi = p.real("readout_rabi_MHz", Some(30.0), Bounds::closed(0.0, 1e4))?;
    let detuning = p.nonzero("detuning_GHz", Some(1.0), Bounds::closed(-100.0, 100.0))?;
    let od = p.real("od", Some(70.0), Bounds::positive(1e4))?;
    let cells = p.count("cells", Some(256), 16, 16384)?;
    let cloud = p.real("cloud_length_cm", Some(1.0), Bounds::positive(100.0))?;
    let temperature = p.real("temperature_uK", Some(20.0), Bounds::positive(1e7))?;
    let pulse = p.real("pulse_us", Some(1.0), Bounds::positive(1e3))?;
    let theta = p.real("write_angle_deg", Some(1.0), Bounds::positive(90.0))?;
    let mismatch = p.real("mismatch_dk_per_cm", Some(10.0), Bounds::closed(-1e4, 1e4))?;
    let lock = p.flag("dispersion_lock", true)?;
    let lossless = p.flag("lossless", false)?;
    let s_lo = p.real("sweep_detuning_min_GHz", Some(0.2), Bounds::positive(100.0))?;
    let s_hi = p.real("sweep_detuning_max_GHz", Some(3.0), Bounds::positive(100.0))?;
    let s_n = p.count("sweep_points", Some(141), 2, 100_000)?;
    let free_space_steps = p.count("free_space_steps", Some(2000), 0, 1_000_000)?;
    if s_hi < s_lo {
        return Err(Failure::Validation("`sweep_detuning_max_GHz` is below `sweep_detuning_min_GHz`".into()));
    }
    let mut model = CavityModel::rb87_d1(length, transmission, rabi, detuning)?;
    model.dispersion_lock = lock;
    if lossless {
        model = model.lossless();
    }
    let grid = Grid1D::cell_centered(-cloud, cloud, cells)?;
    let ens = AtomEnsemble::with_profile(grid, DensityProfile::Uniform { length: cloud }, od, &tr)?
        .with_temperature(temperature);
    let sweep = (0..s_n).map(|i| s_lo + (s_hi - s_lo) * i as f64 / (s_n - 1) as f64).collect();
    Ok(Box::new(CavityReadout { model, ens, tr, pulse, theta, mismatch, sweep, free_space_steps }))
}

impl Experiment for CavityReadout {
    fn run(&self, _seed: u64) -> Result<Artifacts, Failure> {
        let (model, ens, tr) = (&self.model, &self.ens, &self.tr);
        let run = run_readout(model, ens, tr, C64::new(1.0, 0.0), self.pulse)?;
        let off = run_readout_from(model, ens, tr, mismatched_spin_wave(ens, self.mismatch), self.pulse)?;
        let budget = lifetime_budget(model, self.theta, ens, tr)?;
        let delta_f = model.levels[0].detuning;

        let mut out = Artifacts::default();
        out.metric("efficiency", run.efficiency);
        out.metric("offmatched_destruction", 1.0 - run.survival_offmatched);
        out.metric("mismatched_efficiency", off.efficiency);
        out.metric("selectivity", if off.efficiency > 0.0 { run.efficiency / off.efficiency } else { f64::INFINITY });
        out.metric("tau_broadening_us", budget.tau_broadening / US);
        out.metric("tau_thermal_us", budget.tau_thermal / US);
        out.metric("absorption_probability", absorption_probability(model, ens, tr, delta_f));
        out.metric("tau_absorption_us", model.absorption_lifetime(ens.od(), tr) / US);
        out.metric("tau_cavity_ns", model.cavity_lifetime() / 1e-9);
        if self.free_space_steps > 0 {
            out.metric(
                "free_space_destruction",
                free_space_destruction(model, ens, tr, self.pulse, self.free_space_steps)?,
            );
        }

        let mut readout = Trace::new(
            "readout",
            &["time[us]", "matched_population[1]", "cavity_photons[1]", "emitted[1]"],
        );
        for i in 0..run.times.len() {
            readout.push(vec![run.times[i] / US, run.matched_population[i], run.cavity_photons[i], run.emitted[i]]);
        }
        let mut absorption = Trace::new("absorption", &["detuning[GHz]", "absorption_probability[1]"]);
        for &d in &self.sweep {
            absorption.push(vec![d / GHZ, absorption_probability(model, ens, tr, d)]);
        }
        out.traces = vec![readout, absorption];
        Ok(out)
    }
}
