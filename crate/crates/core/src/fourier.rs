//! Unitary discrete Fourier transforms with the `e^{−ikz}` forward kernel.
//!
//! A direct-space envelope `x(z_j)` maps to `x̃(k_m) = step/√(2π) · Σ_j x(z_j) e^{−i k_m z_j}`
//! on the centred conjugate grid, so that `Σ|x|²·step = Σ|x̃|²·kstep`.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::{Fft, FftPlanner};

use crate::grid::{ComplexEnvelope, EnvelopeKind, Grid1D};
use crate::{Error, Result, C64};

/// Forward transform onto the centred conjugate grid.
pub fn dft(env: &ComplexEnvelope) -> Result<ComplexEnvelope> {
    let domain = match env.kind() {
        EnvelopeKind::Direct(d) => d,
        EnvelopeKind::Spectrum { .. } => {
            return Err(Error::InvalidGrid("forward transform of a spectrum".into()))
        }
    };
    let grid = *env.grid();
    let n = grid.count();
    let kgrid = grid.conjugate();
    let mut buf = env.values().to_vec();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let scale = grid.step() / (2.0 * PI).sqrt();
    let z0 = grid.start();
    let values = (0..n)
        .map(|m| {
            let k = kgrid.point(m);
            buf[wrap(m, n)] * C64::from_polar(scale, -k * z0)
        })
        .collect();
    ComplexEnvelope::new(
        kgrid,
        values,
        EnvelopeKind::Spectrum { domain, origin: z0, direct_step: grid.step() },
    )
}

/// Inverse of [`dft`], restoring the original direct-space grid.
pub fn idft(spec: &ComplexEnvelope) -> Result<ComplexEnvelope> {
    let (domain, origin, step) = match spec.kind() {
        EnvelopeKind::Spectrum { domain, origin, direct_step } => (domain, origin, direct_step),
        EnvelopeKind::Direct(_) => {
            return Err(Error::InvalidGrid("inverse transform of a direct-space envelope".into()))
        }
    };
    let kgrid = *spec.grid();
    let n = kgrid.count();
    let mut buf = vec![C64::new(0.0, 0.0); n];
    for (m, &v) in spec.values().iter().enumerate() {
        buf[wrap(m, n)] = v * C64::from_polar(1.0, kgrid.point(m) * origin);
    }
    FftPlanner::new().plan_fft_inverse(n).process(&mut buf);
    let scale = kgrid.step() / (2.0 * PI).sqrt();
    buf.iter_mut().for_each(|v| *v *= scale);
    ComplexEnvelope::new(Grid1D::new(origin, step, n)?, buf, EnvelopeKind::Direct(domain))
}

/// Position in FFT order of centred bin `m`.
fn wrap(m: usize, n: usize) -> usize {
    (m + n - n / 2) % n
}

/// Swap halves so that the zero-frequency bin moves to index `n/2`.
pub fn fftshift<T: Copy>(x: &[T]) -> Vec<T> {
    let n = x.len();
    (0..n).map(|m| x[wrap(m, n)]).collect()
}

/// Inverse of [`fftshift`].
pub fn ifftshift<T: Copy>(x: &[T]) -> Vec<T> {
    let n = x.len();
    let mut out = x.to_vec();
    for m in 0..n {
        out[wrap(m, n)] = x[m];
    }
    out
}

/// Cached plans for in-place transforms of a row-major 2D array (unnormalised).
pub struct Fft2 {
    rows: usize,
    cols: usize,
    fwd_row: Arc<dyn Fft<f64>>,
    fwd_col: Arc<dyn Fft<f64>>,
    inv_row: Arc<dyn Fft<f64>>,
    inv_col: Arc<dyn Fft<f64>>,
}

impl Fft2 {
    pub fn new(rows: usize, cols: usize) -> Self {
        let mut p = FftPlanner::new();
        Self {
            rows,
            cols,
            fwd_row: p.plan_fft_forward(cols),
            fwd_col: p.plan_fft_forward(rows),
            inv_row: p.plan_fft_inverse(cols),
            inv_col: p.plan_fft_inverse(rows),
        }
    }

    pub fn forward(&self, data: &mut [C64]) {
        self.run(data, &*self.fwd_row, &*self.fwd_col);
    }

    /// Inverse transform including the 1/(rows·cols) factor.
    pub fn inverse(&self, data: &mut [C64]) {
        self.run(data, &*self.inv_row, &*self.inv_col);
        let s = 1.0 / (self.rows * self.cols) as f64;
        data.iter_mut().for_each(|v| *v *= s);
    }

    fn run(&self, data: &mut [C64], row: &dyn Fft<f64>, col: &dyn Fft<f64>) {
        assert_eq!(data.len(), self.rows * self.cols);
        for r in data.chunks_exact_mut(self.cols) {
            row.process(r);
        }
        let mut column = vec![C64::new(0.0, 0.0); self.rows];
        for c in 0..self.cols {
            for (r, v) in column.iter_mut().enumerate() {
                *v = data[r * self.cols + c];
            }
            col.process(&mut column);
            for (r, v) in column.iter().enumerate() {
                data[r * self.cols + c] = *v;
            }
        }
    }
}

/// Signed FFT frequency index of bin `i` for length `n`.
pub fn signed_index(i: usize, n: usize) -> i64 {
    if i < n.div_ceil(2) {
        i as i64
    } else {
        i as i64 - n as i64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Domain;
    use proptest::prelude::*;

    fn env(start: f64, step: f64, vals: Vec<C64>) -> ComplexEnvelope {
        let g = Grid1D::new(start, step, vals.len()).unwrap();
        ComplexEnvelope::direct(g, vals, Domain::SignalInZ).unwrap()
    }

    #[test]
    fn constant_maps_to_single_bin() {
        let e = env(0.0, 1.0, vec![C64::new(1.0, 0.0); 8]);
        let s = dft(&e).unwrap();
        for (m, v) in s.values().iter().enumerate() {
            if m == 4 {
                assert!((v.norm() - 8.0 / (2.0 * PI).sqrt()).abs() < 1e-12);
            } else {
                assert!(v.norm() < 1e-12);
            }
        }
    }

    #[test]
    fn matches_direct_sum() {
        let vals: Vec<C64> = (0..12).map(|j| C64::new((j as f64).sin(), 0.3 * j as f64)).collect();
        let e = env(-0.7, 0.13, vals.clone());
        let s = dft(&e).unwrap();
        for (m, k) in s.grid().points().enumerate() {
            let direct: C64 = e
                .grid()
                .points()
                .zip(&vals)
                .map(|(z, &x)| x * C64::from_polar(1.0, -k * z))
                .sum::<C64>()
                * (0.13 / (2.0 * PI).sqrt());
            assert!((direct - s.values()[m]).norm() < 1e-12);
        }
    }

    #[test]
    fn gaussian_widths_are_reciprocal() {
        let sigma = 0.4;
        let g = Grid1D::centered(0.02, 1024).unwrap();
        let e = ComplexEnvelope::from_fn(g, Domain::CoherenceInZ, |z| {
            C64::new((-z * z / (4.0 * sigma * sigma)).exp(), 0.0)
        });
        let s = dft(&e).unwrap();
        let rms = |e: &ComplexEnvelope| {
            let w: f64 = e.values().iter().map(|v| v.norm_sqr()).sum();
            let m2: f64 = e.grid().points().zip(e.values()).map(|(x, v)| x * x * v.norm_sqr()).sum();
            (m2 / w).sqrt()
        };
        let (sz, sk) = (rms(&e), rms(&s));
        assert!((sz - sigma).abs() / sigma < 1e-9);
        assert!((sk - 1.0 / (2.0 * sigma)).abs() * 2.0 * sigma < 1e-9);
    }

    #[test]
    fn shift_roundtrip() {
        for n in [7usize, 8] {
            let x: Vec<usize> = (0..n).collect();
            assert_eq!(ifftshift(&fftshift(&x)), x);
            assert_eq!(fftshift(&x)[n / 2], 0);
        }
    }

    #[test]
    fn fft2_roundtrip() {
        let f = Fft2::new(4, 6);
        let orig: Vec<C64> = (0..24).map(|i| C64::new(i as f64, -(i as f64).sqrt())).collect();
        let mut d = orig.clone();
        f.forward(&mut d);
        f.inverse(&mut d);
        for (a, b) in d.iter().zip(&orig) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    fn arb_signal() -> impl Strategy<Value = (f64, f64, Vec<C64>)> {
        (-5.0..5.0f64, 0.01..2.0f64, prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 2..300))
            .prop_map(|(s, h, v)| (s, h, v.into_iter().map(|(a, b)| C64::new(a, b)).collect()))
    }

    proptest! {
        #[test]
        fn parseval((start, step, vals) in arb_signal()) {
            let e = env(start, step, vals);
            let s = dft(&e).unwrap();
            let lhs = e.norm_sqr();
            prop_assert!((lhs - s.norm_sqr()).abs() <= 1e-10 * lhs.max(1e-300));
        }

        #[test]
        fn roundtrip((start, step, vals) in arb_signal()) {
            let e = env(start, step, vals);
            let back = idft(&dft(&e).unwrap()).unwrap();
            prop_assert_eq!(back.grid(), e.grid());
            for (a, b) in back.values().iter().zip(e.values()) {
                prop_assert!((a - b).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn parseval_large() {
        let n = 1 << 16;
        let vals: Vec<C64> = (0..n).map(|j| C64::new(((j * 7919) % 101) as f64 - 50.0, ((j * 31) % 17) as f64)).collect();
        let e = env(0.0, 1e-3, vals);
        let s = dft(&e).unwrap();
        assert!((e.norm_sqr() - s.norm_sqr()).abs() / e.norm_sqr() < 1e-10);
    }
}
