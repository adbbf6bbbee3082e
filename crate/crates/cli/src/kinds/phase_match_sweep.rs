//! Readout amplitude against longitudinal phase mismatch, and the mismatch produced by
//! scattering at an angle.

use std::f64::consts::PI;

use qmemlab::consts::Transition;
use qmemlab::ensemble::{AtomEnsemble, DensityProfile};
use qmemlab::grid::Grid1D;
use qmemlab::phase_match::{delta_kz, delta_kz_quadratic, DEFAULT_KZ_OFFSET, READ_WAVELENGTH_NM, SCATTER_WAVELENGTH_NM};
use qmemlab::protocols::{phase_matching_curve, sinc_abs};

use super::{Experiment, CM};
use crate::failure::Failure;
use crate::output::{Artifacts, Trace};
use crate::scenario::{Bounds, Params};

struct PhaseMatchSweep {
    ens: AtomEnsemble,
    tr: Transition,
    length: f64,
    detuning: f64,
    rabi: f64,
    products: Vec<f64>,
    angles: Vec<f64>,
    offset: f64,
}

pub fn plan(p: &mut Params) -> Result<Box<dyn Experiment>, Failure> {
    let tr = Transition::rb87_d1();
    let od = p.real("od", Some(0.1), Bounds::positive(1e4))?;
    let cells = p.count("cells", Some(1024), 16, 65536)?;
    let length = p.real("cloud_length_cm", Some(1.0), Bounds::positive(100.0))?;
    let detuning = p.nonzero("detuning_MHz", Some(60.0), Bounds::closed(-1e5, 1e5))?;
    let rabi = p.real("coupling_rabi_MHz", Some(5.0), Bounds::positive(1e4))?;
    let lo = p.real("mismatch_min", Some(-20.0), Bounds::closed(-1e4, 1e4))?;
    let hi = p.real("mismatch_max", Some(20.0), Bounds::closed(-1e4, 1e4))?;
    let n = p.count("mismatch_points", Some(81), 2, 100_000)?;
    let angle_max = p.real("angle_max_deg", Some(3.0), Bounds::positive(90.0))?;
    let angle_n = p.count("angle_points", Some(61), 2, 100_000)?;
    let offset = p.real("kz_offset_per_cm", Some(DEFAULT_KZ_OFFSET * CM), Bounds::closed(-1e6, 1e6))?;
    if hi <= lo {
        return Err(Failure::Validation("`mismatch_max` must exceed `mismatch_min`".into()));
    }
    let grid = Grid1D::cell_centered(-0.5 * length, 0.5 * length, cells)?;
    let ens = AtomEnsemble::with_profile(grid, DensityProfile::Uniform { length }, od, &tr)?;
    Ok(Box::new(PhaseMatchSweep {
        ens,
        tr,
        length,
        detuning,
        rabi,
        products: (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
        angles: (0..angle_n).map(|i| angle_max * i as f64 / (angle_n - 1) as f64).collect(),
        offset,
    }))
}

impl Experiment for PhaseMatchSweep {
    fn run(&self, _seed: u64) -> Result<Artifacts, Failure> {
        let dks: Vec<f64> = self.products.iter().map(|x| x / self.length).collect();
        let curve = phase_matching_curve(&self.ens, &self.tr, self.detuning, self.rabi, &dks)?;
        let model: Vec<f64> = self.products.iter().map(|x| sinc_abs(0.5 * x)).collect();
        let dot: f64 = curve.iter().zip(&model).map(|(a, b)| a * b).sum();
        let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let correlation = dot / (norm(&curve) * norm(&model));
        let max_error = curve.iter().zip(&model).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);

        let mut out = Artifacts::default();
        out.metric("sinc_correlation", correlation);
        out.metric("sinc_max_abs_error", max_error);

        let mut sweep = Trace::new("mismatch", &["dkz_L[1]", "readout_amplitude[1]", "sinc[1]"]);
        for ((x, a), m) in self.products.iter().zip(&curve).zip(&model) {
            sweep.push(vec![*x, *a, *m]);
        }
        let k_in = 2.0 * PI / (SCATTER_WAVELENGTH_NM * 1e-9);
        let k_read = 2.0 * PI / (READ_WAVELENGTH_NM * 1e-9);
        let mut angle = Trace::new(
            "angle",
            &["angle[deg]", "dkz[rad/cm]", "dkz_small_angle[rad/cm]", "expected_amplitude[1]"],
        );
        let mut first_zero = None;
        for &theta in &self.angles {
            let dk = delta_kz(theta, k_in, k_read, self.offset);
            let amp = sinc_abs(0.5 * dk * self.length);
            if first_zero.is_none() && (dk * self.length).abs() >= 2.0 * PI {
                first_zero = Some(theta);
            }
            angle.push(vec![theta.to_degrees(), dk * CM, delta_kz_quadratic(theta, k_in, k_read, self.offset) * CM, amp]);
        }
        if let Some(theta) = first_zero {
            out.metric("first_zero_angle_deg", theta.to_degrees());
        }
        out.traces = vec![sweep, angle];
        Ok(out)
    }
}
