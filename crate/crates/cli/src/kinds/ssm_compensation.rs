//! Spatial spin-wave modulation: intensity-noise dephasing of an imprinted phase, and
//! off-axis fringe retrieval of a phase step and of a lens profile.

use std::f64::consts::PI;

use qmemlab::protocols::{fringe_round_trip, gaussian_field, measured_phase_step};
use qmemlab::ssm::{fidelity, fit_dephasing_rate, fit_focal_length, monte_carlo_envelope, unwrap_phase, ComplexImage, Image};

use super::{Experiment, CM};
use crate::failure::Failure;
use crate::output::{Artifacts, Trace};
use crate::scenario::{Bounds, Params};

struct SsmCompensation {
    noise_levels: Vec<f64>,
    draws: usize,
    max_dephasing: f64,
    phase_points: usize,
    size: usize,
    waist: f64,
    carrier: (f64, f64),
    reference_amp: f64,
    step: f64,
    edge: f64,
    focal: f64,
    pixel: f64,
    wavelength: f64,
}

pub fn plan(p: &mut Params) -> Result<Box<dyn Experiment>, Failure> {
    let plan = SsmCompensation {
        noise_levels: p.list("noise_levels", &[0.03, 0.06, 0.12], Bounds::positive(1.0), 32)?,
        draws: p.count("draws", Some(100_000), 100, 100_000_000)?,
        max_dephasing: p.real("max_dephasing_rad", Some(1.5), Bounds::positive(3.0))?,
        phase_points: p.count("phase_points", Some(41), 2, 100_000)?,
        size: p.count("image_size_px", Some(512), 32, 4096)?,
        waist: p.real("beam_waist_px", Some(120.0), Bounds::positive(1e4))?,
        carrier: (
            p.real("carrier_x_rad_per_px", Some(1.2), Bounds::closed(-PI, PI))?,
            p.real("carrier_y_rad_per_px", Some(0.6), Bounds::closed(-PI, PI))?,
        ),
        reference_amp: p.real("reference_amplitude", Some(2.0), Bounds::positive(1e6))?,
        step: p.real("phase_step_rad", Some(PI), Bounds::closed(-PI, PI))?,
        edge: p.real("step_edge_px", Some(1.5), Bounds::positive(100.0))?,
        focal: p.nonzero("lens_focal_cm", Some(50.0), Bounds::closed(-1e5, 1e5))?,
        pixel: p.real("pixel_um", Some(5.0), Bounds::positive(1e4))?,
        wavelength: p.real("wavelength_nm", Some(795.0), Bounds::positive(1e5))?,
    };
    if plan.carrier.0 == 0.0 && plan.carrier.1 == 0.0 {
        return Err(Failure::Validation("the fringe carrier must be non-zero".into()));
    }
    Ok(Box::new(plan))
}

fn intensity(field: &ComplexImage) -> Image<f64> {
    Image::from_fn(field.rows(), field.cols(), |r, c| field.get(r, c).norm_sqr())
}

fn centre_row(name: &str, original: &ComplexImage, recovered: &ComplexImage) -> Trace {
    let row = original.rows() / 2;
    let unwrap = |f: &ComplexImage| unwrap_phase(&f.row(row).iter().map(|v| v.arg()).collect::<Vec<_>>());
    let (a, b) = (unwrap(original), unwrap(recovered));
    let mut t = Trace::new(name, &["x[px]", "abs[1]", "phase[rad]", "recovered_abs[1]", "recovered_phase[rad]"]);
    for c in 0..original.cols() {
        t.push(vec![c as f64, original.get(row, c).norm(), a[c], recovered.get(row, c).norm(), b[c]]);
    }
    t
}

impl Experiment for SsmCompensation {
    fn run(&self, seed: u64) -> Result<Artifacts, Failure> {
        let mut out = Artifacts::default();

        let mut envelopes = Trace::new("dephasing", &["noise_level[1]", "phase[rad]", "monte_carlo[1]", "model[1]"]);
        let mut fits = Trace::new("dephasing_fit", &["noise_level[1]", "fitted_rate[1]", "expected_rate[1]", "relative_error[1]"]);
        let mut worst: f64 = 0.0;
        for (i, &sigma) in self.noise_levels.iter().enumerate() {
            let phi_max = self.max_dephasing / sigma;
            let phi: Vec<f64> =
                (0..self.phase_points).map(|j| phi_max * j as f64 / (self.phase_points - 1) as f64).collect();
            let mc = monte_carlo_envelope(sigma, &phi, self.draws, seed.wrapping_add(i as u64));
            let expected = sigma * sigma;
            for (p, m) in phi.iter().zip(&mc) {
                envelopes.push(vec![sigma, *p, *m, (-expected * p * p).exp()]);
            }
            let fitted = fit_dephasing_rate(&phi, &mc)?;
            let err = fitted / expected - 1.0;
            worst = worst.max(err.abs());
            fits.push(vec![sigma, fitted, expected, err]);
        }
        out.metric("dephasing_fit_worst_relative_error", worst);

        let (step, edge) = (self.step, self.edge);
        let step_field = gaussian_field(self.size, self.waist, |x, _| 0.5 * step * (1.0 + (x / edge).tanh()));
        let step_rt = fringe_round_trip(&step_field, self.reference_amp, self.carrier)?;
        let guard = (8.0 * edge).ceil() as usize;
        let recovered_step = measured_phase_step(&step_rt.recovered, guard);
        out.metric("phase_step_recovered_rad", recovered_step);
        let error = qmemlab::C64::from_polar(1.0, recovered_step - measured_phase_step(&step_field, guard)).arg();
        out.metric("phase_step_error_rad", error.abs());
        out.metric("phase_step_fidelity", fidelity(&intensity(&step_field), &intensity(&step_rt.recovered))?);

        let k = 2.0 * PI / self.wavelength;
        let scale = k * self.pixel * self.pixel / (2.0 * self.focal);
        let lens_field = gaussian_field(self.size, self.waist, |x, y| -scale * (x * x + y * y));
        let lens_rt = fringe_round_trip(&lens_field, self.reference_amp, self.carrier)?;
        let focal = fit_focal_length(&lens_rt.recovered, self.pixel, self.wavelength, 0.05)?;
        out.metric("lens_focal_fitted_cm", focal / CM);
        out.metric("lens_focal_relative_error", (focal / self.focal - 1.0).abs());
        out.metric("lens_fidelity", fidelity(&intensity(&lens_field), &intensity(&lens_rt.recovered))?);

        out.traces = vec![
            envelopes,
            fits,
            centre_row("phase_step_row", &step_field, &step_rt.recovered),
            centre_row("lens_row", &lens_field, &lens_rt.recovered),
        ];
        Ok(out)
    }
}
