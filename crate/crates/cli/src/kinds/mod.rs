//! Scenario kinds. Each one reads and validates its parameters up front into a plan that can
//! later be run without further input checks.

mod cavity_readout;
mod collapse_revival;
mod efficiency_map;
mod gem_echo;
mod memory_cycle;
mod phase_match_sweep;
mod spectrometer;
mod ssm_compensation;

use toml::Table;

use crate::failure::Failure;
use crate::output::Artifacts;
use crate::scenario::{Params, Scenario};

/// A validated scenario, ready to compute.
pub trait Experiment: Send + Sync {
    fn run(&self, seed: u64) -> Result<Artifacts, Failure>;
}

type Planner = fn(&mut Params) -> Result<Box<dyn Experiment>, Failure>;

pub const KINDS: &[(&str, Planner)] = &[
    ("memory-cycle", memory_cycle::plan),
    ("gem-echo", gem_echo::plan),
    ("collapse-revival", collapse_revival::plan),
    ("ssm-compensation", ssm_compensation::plan),
    ("spectrometer", spectrometer::plan),
    ("efficiency-map", efficiency_map::plan),
    ("cavity-readout", cavity_readout::plan),
    ("phase-match-sweep", phase_match_sweep::plan),
];

/// Validates a scenario and returns its plan with the fully resolved parameter table.
pub fn plan(scenario: &Scenario) -> Result<(Box<dyn Experiment>, Table), Failure> {
    let planner = KINDS.iter().find(|(k, _)| *k == scenario.kind).map(|(_, p)| p).ok_or_else(|| {
        let known: Vec<&str> = KINDS.iter().map(|(k, _)| *k).collect();
        Failure::Validation(format!("unknown kind {:?} (expected one of {})", scenario.kind, known.join(", ")))
    })?;
    let mut params = Params::new(scenario.params.clone());
    let experiment = planner(&mut params)?;
    Ok((experiment, params.finish()?))
}

/// Grid point positions in display units.
fn scaled(points: impl Iterator<Item = f64>, unit: f64) -> impl Iterator<Item = f64> {
    points.map(move |x| x / unit)
}

const MHZ: f64 = 2.0 * std::f64::consts::PI * 1e6;
const US: f64 = 1e-6;
const CM: f64 = 1e-2;
