use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Every failure the library can report.
///
/// Variants are grouped so that callers can map them onto coarse categories
/// (bad input, numerical breakdown) via [`Error::is_numeric`].
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("adiabatic elimination is singular at zero single-photon detuning")]
    SingularElimination,
    #[error("cell rotation angle {angle:.3e} rad exceeds the stability bound {bound} rad")]
    StabilityBound { angle: f64, bound: f64 },
    #[error("non-finite value in slice {slice} (last valid slice: {last_valid:?})")]
    NonFinite { slice: usize, last_valid: Option<usize> },
    #[error("conservation diagnostics require a lossless trajectory")]
    LossyDiagnostic,
    #[error("image is identically zero")]
    ZeroImage,
    #[error("sidebands overlap: carrier {carrier:.3e} rad/m is below twice the signal bandwidth {bandwidth:.3e} rad/m")]
    SidebandOverlap { carrier: f64, bandwidth: f64 },
    #[error("quadratic phase undersampled: {points_per_fringe:.2} points per fringe at the envelope edge (need >= 4)")]
    Aliasing { points_per_fringe: f64 },
    #[error("envelope has zero norm")]
    ZeroNorm,
    #[error("basis size {requested} exceeds grid rank {rank}")]
    BasisTooLarge { requested: usize, rank: usize },
    #[error("fit needs at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("non-positive sample {value} at index {index}")]
    NonPositiveSample { index: usize, value: f64 },
    #[error("integration step {dt:.3e} s exceeds the bound {bound:.3e} s")]
    StepTooLarge { dt: f64, bound: f64 },
}

impl Error {
    /// True for failures that arise during a numerical run rather than from bad input.
    pub fn is_numeric(&self) -> bool {
        matches!(self, Error::NonFinite { .. } | Error::ZeroNorm | Error::ZeroImage)
    }

    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name, reason: reason.into() }
    }
}
