//! Interference of equally populated precession groups: collapse and periodic revival.

use qmemlab::protocols::staircase_revival;

use super::{Experiment, US};
use crate::failure::Failure;
use crate::output::{Artifacts, Trace};
use crate::scenario::{Bounds, Params};

struct CollapseRevival {
    groups: usize,
    base: f64,
    spacing: f64,
    samples: usize,
}

pub fn plan(p: &mut Params) -> Result<Box<dyn Experiment>, Failure> {
    Ok(Box::new(CollapseRevival {
        groups: p.count("groups", Some(4), 2, 1024)?,
        base: p.real("base_larmor_kHz", Some(100.0), Bounds::closed(-1e6, 1e6))?,
        spacing: p.real("larmor_spacing_kHz", Some(10.0), Bounds::positive(1e6))?,
        samples: p.count("samples_per_period", Some(1000), 4, 1_000_000)?,
    }))
}

impl Experiment for CollapseRevival {
    fn run(&self, _seed: u64) -> Result<Artifacts, Failure> {
        let r = staircase_revival(self.groups, self.base, self.spacing, self.samples)?;
        let s0 = r.signal[0].norm();
        let max_error = r.signal.iter().zip(&r.analytic).map(|(s, a)| (s.norm() - a).abs()).fold(0.0, f64::max);
        let mut out = Artifacts::default();
        out.metric("signal_at_zero", s0);
        out.metric("minimum_ratio", r.minimum);
        out.metric("revival_ratio", r.revival);
        out.metric("revival_time_us", 2.0 * std::f64::consts::PI / self.spacing / US);
        out.metric("max_deviation_from_closed_form", max_error);

        let mut trace = Trace::new("signal", &["time[us]", "abs_S[1]", "re_S[1]", "im_S[1]", "closed_form_abs_S[1]"]);
        for ((t, s), a) in r.times.iter().zip(&r.signal).zip(&r.analytic) {
            trace.push(vec![t / US, s.norm(), s.re, s.im, *a]);
        }
        out.traces = vec![trace];
        Ok(out)
    }
}
