//! Numerical laboratory for off-resonant Raman quantum memories in cold atoms.
//!
//! The crate is organised as a stack of layers:
//!
//! * [`consts`], [`grid`], [`fourier`], [`ensemble`]: physical constants, uniform grids,
//!   complex envelopes and the unitary discrete Fourier transform shared by everything else;
//! * [`mb_solver`]: the 1+1D Maxwell-Bloch integrator built from per-cell exchange rotations;
//! * [`phase_match`]: wavevector bookkeeping and Larmor-precession interference signals;
//! * [`ssm`]: spatial phase imprinting on spin waves, fidelity and fringe demodulation;
//! * [`temporal`]: Wigner maps, ray transfer matrices and the gradient-echo spectrometer;
//! * [`cavity`]: ring-cavity readout of a single phase-matched spin-wave mode;
//! * [`protocols`]: canned solver experiments (memory cycle, loss laws, phase matching).

pub mod cavity;
pub mod consts;
pub mod ensemble;
pub mod error;
pub mod fourier;
pub mod grid;
pub mod mb_solver;
pub mod phase_match;
pub mod protocols;
pub mod ssm;
pub mod temporal;
pub mod units;

pub use error::{Error, Result};

/// Double precision complex number used throughout the crate.
pub type C64 = num_complex::Complex64;
