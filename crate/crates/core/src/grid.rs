//! Uniform grids and complex envelopes sampled on them.

use std::f64::consts::PI;

use crate::{Error, Result, C64};

/// Uniform sampling `start + i·step`, `i = 0..count`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid1D {
    start: f64,
    step: f64,
    count: usize,
}

impl Grid1D {
    pub fn new(start: f64, step: f64, count: usize) -> Result<Self> {
        if count < 2 {
            return Err(Error::InvalidGrid(format!("count {count} < 2")));
        }
        if !(step > 0.0) || !step.is_finite() || !start.is_finite() {
            return Err(Error::InvalidGrid(format!("start {start}, step {step}")));
        }
        Ok(Self { start, step, count })
    }

    /// `count` cells of equal width covering `[lo, hi)`, sampled at cell centres.
    pub fn cell_centered(lo: f64, hi: f64, count: usize) -> Result<Self> {
        if count < 2 || !(hi > lo) {
            return Err(Error::InvalidGrid(format!("[{lo}, {hi}) with {count} cells")));
        }
        let step = (hi - lo) / count as f64;
        Self::new(lo + 0.5 * step, step, count)
    }

    /// Grid symmetric about zero with the given spacing.
    pub fn centered(step: f64, count: usize) -> Result<Self> {
        Self::new(-((count / 2) as f64) * step, step, count)
    }

    pub fn start(&self) -> f64 {
        self.start
    }
    pub fn step(&self) -> f64 {
        self.step
    }
    pub fn count(&self) -> usize {
        self.count
    }
    pub fn span(&self) -> f64 {
        self.step * self.count as f64
    }
    pub fn end(&self) -> f64 {
        self.start + self.step * (self.count - 1) as f64
    }

    pub fn point(&self, i: usize) -> f64 {
        self.start + self.step * i as f64
    }

    pub fn points(&self) -> impl ExactSizeIterator<Item = f64> + '_ {
        (0..self.count).map(move |i| self.point(i))
    }

    /// Index of the sample nearest to `x`, clamped to the grid.
    pub fn nearest(&self, x: f64) -> usize {
        let i = ((x - self.start) / self.step).round();
        i.clamp(0.0, (self.count - 1) as f64) as usize
    }

    /// Centred conjugate grid with spacing 2π/(count·step), zero at index count/2.
    pub fn conjugate(&self) -> Grid1D {
        let dk = 2.0 * PI / (self.count as f64 * self.step);
        Grid1D::centered(dk, self.count).expect("conjugate of a valid grid")
    }
}

/// Physical meaning of a direct-space envelope.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    SignalInTime,
    SignalInZ,
    CoherenceInZ,
}

/// Whether an envelope lives in direct space or is the transform of one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EnvelopeKind {
    Direct(Domain),
    /// Transform of a direct-space envelope whose grid started at `origin`
    /// and had the given spacing.
    Spectrum { domain: Domain, origin: f64, direct_step: f64 },
}

/// Complex samples on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexEnvelope {
    grid: Grid1D,
    values: Vec<C64>,
    kind: EnvelopeKind,
}

impl ComplexEnvelope {
    pub fn new(grid: Grid1D, values: Vec<C64>, kind: EnvelopeKind) -> Result<Self> {
        if values.len() != grid.count() {
            return Err(Error::DimensionMismatch { expected: grid.count(), got: values.len() });
        }
        Ok(Self { grid, values, kind })
    }

    pub fn direct(grid: Grid1D, values: Vec<C64>, domain: Domain) -> Result<Self> {
        Self::new(grid, values, EnvelopeKind::Direct(domain))
    }

    pub fn zeros(grid: Grid1D, domain: Domain) -> Self {
        Self { grid, values: vec![C64::new(0.0, 0.0); grid.count()], kind: EnvelopeKind::Direct(domain) }
    }

    pub fn from_fn(grid: Grid1D, domain: Domain, f: impl Fn(f64) -> C64) -> Self {
        let values = grid.points().map(f).collect();
        Self { grid, values, kind: EnvelopeKind::Direct(domain) }
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }
    pub fn values(&self) -> &[C64] {
        &self.values
    }
    pub fn values_mut(&mut self) -> &mut [C64] {
        &mut self.values
    }
    pub fn into_values(self) -> Vec<C64> {
        self.values
    }
    pub fn kind(&self) -> EnvelopeKind {
        self.kind
    }

    /// Σ|x|²·step.
    pub fn norm_sqr(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.grid.step()
    }

    /// Copy scaled so that [`Self::norm_sqr`] is one.
    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm_sqr();
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::ZeroNorm);
        }
        let s = 1.0 / n.sqrt();
        Ok(Self { values: self.values.iter().map(|v| v * s).collect(), ..self.clone() })
    }

    pub fn map(&self, f: impl Fn(f64, C64) -> C64) -> Self {
        let values = self.grid.points().zip(&self.values).map(|(x, &v)| f(x, v)).collect();
        Self { values, ..self.clone() }
    }

    pub(crate) fn check_same_grid(&self, other: &Grid1D) -> Result<()> {
        if self.grid.count() != other.count() {
            return Err(Error::DimensionMismatch { expected: other.count(), got: self.grid.count() });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_degenerate_grids() {
        assert!(Grid1D::new(0.0, 1.0, 1).is_err());
        assert!(Grid1D::new(0.0, 0.0, 4).is_err());
        assert!(Grid1D::new(0.0, -1.0, 4).is_err());
    }

    #[test]
    fn cell_centered_covers_interval() {
        let g = Grid1D::cell_centered(-1.0, 1.0, 4).unwrap();
        assert_eq!(g.points().collect::<Vec<_>>(), vec![-0.75, -0.25, 0.25, 0.75]);
        assert_eq!(g.span(), 2.0);
    }

    #[test]
    fn conjugate_step() {
        let g = Grid1D::new(0.0, 0.1, 64).unwrap();
        let k = g.conjugate();
        assert!((k.step() - 2.0 * PI / 6.4).abs() < 1e-15);
        assert_eq!(k.point(32), 0.0);
    }

    #[test]
    fn envelope_length_checked() {
        let g = Grid1D::new(0.0, 1.0, 4).unwrap();
        assert!(ComplexEnvelope::direct(g, vec![C64::new(0.0, 0.0); 3], Domain::SignalInZ).is_err());
    }

    #[test]
    fn normalized_has_unit_norm() {
        let g = Grid1D::new(0.0, 0.5, 8).unwrap();
        let e = ComplexEnvelope::from_fn(g, Domain::SignalInTime, |x| C64::new(x, 1.0));
        assert!((e.normalized().unwrap().norm_sqr() - 1.0).abs() < 1e-14);
        assert_eq!(ComplexEnvelope::zeros(g, Domain::SignalInTime).normalized(), Err(Error::ZeroNorm));
    }
}
