//! Mean echo efficiency over the gradient bandwidth and decay-rate plane, plus simulated
//! uniform-cloud efficiencies compared with the closed-form laws.

use std::f64::consts::PI;

use qmemlab::consts::Transition;
use qmemlab::ensemble::DensityProfile;
use qmemlab::protocols::uniform_echo_efficiency;
use qmemlab::temporal::{efficiency_map, gem_efficiency, raman_echo_efficiency};

use super::{Experiment, MHZ, US};
use crate::failure::Failure;
use crate::output::{Artifacts, Trace};
use crate::scenario::{Bounds, Params};

struct EfficiencyMap {
    profile: DensityProfile,
    length: f64,
    od: f64,
    bandwidths: Vec<f64>,
    inverse_taus: Vec<f64>,
    law_products: Vec<f64>,
    law_lossless: bool,
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

pub fn plan(p: &mut Params) -> Result<Box<dyn Experiment>, Failure> {
    let od = p.real("od", Some(70.0), Bounds::positive(1e4))?;
    let length = p.real("cloud_length_cm", Some(1.0), Bounds::positive(100.0))?;
    let profile = match p.choice("profile", "super-gaussian", &["super-gaussian", "gaussian", "uniform"])? {
        "uniform" => DensityProfile::Uniform { length },
        "gaussian" => DensityProfile::Gaussian { sigma: 0.5 * length / (2.0 * 2f64.ln()).sqrt() },
        _ => DensityProfile::SuperGaussian { sigma: 0.5 * length / (4.0 * 2f64.ln()).powf(0.25) },
    };
    let b_lo = p.real("bandwidth_min_MHz", Some(0.1), Bounds::positive(1e3))?;
    let b_hi = p.real("bandwidth_max_MHz", Some(2.0), Bounds::positive(1e3))?;
    let b_n = p.count("bandwidth_points", Some(40), 1, 10_000)?;
    let g_lo = p.real("inverse_tau_min_per_us", Some(0.01), Bounds::positive(1e3))?;
    let g_hi = p.real("inverse_tau_max_per_us", Some(1.0), Bounds::positive(1e3))?;
    let g_n = p.count("inverse_tau_points", Some(40), 1, 10_000)?;
    let law_products = p.list("law_time_bandwidth_cycles", &[5.0, 13.0, 40.0], Bounds::positive(1e3), 16)?;
    let law_lossless = p.flag("law_lossless", true)?;
    if b_hi < b_lo || g_hi < g_lo {
        return Err(Failure::Validation("range maxima must not be below their minima".into()));
    }
    Ok(Box::new(EfficiencyMap {
        profile,
        length,
        od,
        bandwidths: linspace(b_lo, b_hi, b_n),
        inverse_taus: linspace(g_lo, g_hi, g_n),
        law_products: law_products.iter().map(|x| 2.0 * PI * x).collect(),
        law_lossless,
    }))
}

impl Experiment for EfficiencyMap {
    fn run(&self, _seed: u64) -> Result<Artifacts, Failure> {
        let profile = self.profile;
        let points = efficiency_map(move |z| profile.shape(z), self.length, self.od, &self.bandwidths, &self.inverse_taus)?;
        let mut map = Trace::new("map", &["bandwidth[MHz]", "inverse_tau[1/us]", "mean_efficiency[1]", "fwhm[MHz]"]);
        for pt in &points {
            map.push(vec![pt.bandwidth / MHZ, pt.inverse_tau * US, pt.mean_eta, pt.fwhm / MHZ]);
        }
        let best = points.iter().map(|p| p.mean_eta).fold(0.0, f64::max);

        let tr = Transition::rb87_d1();
        let mut law = Trace::new(
            "law",
            &["time_bandwidth[cycles]", "simulated[1]", "raman_law[1]", "ideal_formula[1]"],
        );
        let (mut dev_raman, mut dev_formula): (f64, f64) = (0.0, 0.0);
        for &tb in &self.law_products {
            let sim = uniform_echo_efficiency(&tr, self.od, tb, self.law_lossless)?;
            let (raman, formula) = (raman_echo_efficiency(self.od, tb), gem_efficiency(self.od, tb));
            dev_raman = dev_raman.max((sim - raman).abs());
            dev_formula = dev_formula.max((sim - formula).abs());
            law.push(vec![tb / (2.0 * PI), sim, raman, formula]);
        }

        let mut out = Artifacts::default();
        out.metric("map_best_mean_efficiency", best);
        out.metric("law_max_deviation_from_raman_law", dev_raman);
        out.metric("law_max_deviation_from_ideal_formula", dev_formula);
        out.traces = vec![map, law];
        Ok(out)
    }
}
