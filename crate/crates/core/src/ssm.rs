//! Spatial spin-wave modulation: Stark phase imprinting, noise-driven dephasing,
//! compensation fidelity, off-axis fringe synthesis and demodulation, and the
//! far-field waist of a lensed spin wave.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::fourier::{signed_index, Fft2};
use crate::mb_solver::MemoryState;
use crate::{Error, Result, C64};

/// Row-major 2D array; rows run along y, columns along x (or z).
#[derive(Debug, Clone, PartialEq)]
pub struct Image<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

pub type RealImage = Image<f64>;
pub type ComplexImage = Image<C64>;

impl<T: Copy> Image<T> {
    pub fn new(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidGrid("image must have at least one pixel".into()));
        }
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch { expected: rows * cols, got: data.len() });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> T) -> Self {
        let data = (0..rows * cols).map(|i| f(i / cols, i % cols)).collect();
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }
    pub fn cols(&self) -> usize {
        self.cols
    }
    pub fn data(&self) -> &[T] {
        &self.data
    }
    pub fn get(&self, row: usize, col: usize) -> T {
        self.data[row * self.cols + col]
    }
    pub fn row(&self, row: usize) -> &[T] {
        &self.data[row * self.cols..(row + 1) * self.cols]
    }

    fn same_shape<U>(&self, other: &Image<U>) -> Result<()> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::DimensionMismatch { expected: self.rows * self.cols, got: other.rows * other.cols });
        }
        Ok(())
    }
}

/// Stark-beam intensity pattern I(y, z) applied for a time T.
#[derive(Debug, Clone, PartialEq)]
pub struct StarkMask {
    intensity: RealImage,
    duration: f64,
    phase_per_intensity: f64,
    noise_rel_sigma: f64,
}

impl StarkMask {
    pub fn new(intensity: RealImage, duration: f64, phase_per_intensity: f64, noise_rel_sigma: f64) -> Result<Self> {
        if intensity.data.iter().any(|i| !(*i >= 0.0) || !i.is_finite()) {
            return Err(Error::param("intensity", "must be finite and non-negative"));
        }
        if !(duration >= 0.0) {
            return Err(Error::param("duration", "must be non-negative"));
        }
        if !(noise_rel_sigma >= 0.0) {
            return Err(Error::param("noise_rel_sigma", "must be non-negative"));
        }
        Ok(Self { intensity, duration, phase_per_intensity, noise_rel_sigma })
    }

    /// Mask whose noiseless phase equals `phase` along z (one row), with unit phase per intensity·time.
    pub fn from_phase_profile(phase: &[f64]) -> Result<Self> {
        let floor = phase.iter().copied().fold(0.0f64, f64::min);
        let data: Vec<f64> = phase.iter().map(|p| p - floor).collect();
        let mask = Self::new(Image::new(1, phase.len(), data)?, 1.0, 1.0, 0.0)?;
        Ok(mask)
    }

    pub fn intensity(&self) -> &RealImage {
        &self.intensity
    }
    pub fn noise_rel_sigma(&self) -> f64 {
        self.noise_rel_sigma
    }

    /// Noiseless imprinted phase φ = (phase per intensity)·T·I along row `y_index`.
    pub fn phase_row(&self, y_index: usize) -> Result<Vec<f64>> {
        if y_index >= self.intensity.rows {
            return Err(Error::param("y_index", format!("row {y_index} outside a {}-row mask", self.intensity.rows)));
        }
        let s = self.phase_per_intensity * self.duration;
        Ok(self.intensity.row(y_index).iter().map(|i| s * i).collect())
    }
}

/// Multiplies the stored coherence by e^{iφ(z)} for the noiseless mask row `y_index`.
pub fn imprint_phase(state: &MemoryState, mask: &StarkMask, y_index: usize) -> Result<MemoryState> {
    apply_phase_profile(state, &mask.phase_row(y_index)?)
}

/// As [`imprint_phase`] with pixelwise Gaussian intensity noise of relative width σ_I/I.
pub fn imprint_phase_noisy<R: Rng>(
    state: &MemoryState,
    mask: &StarkMask,
    y_index: usize,
    rng: &mut R,
) -> Result<MemoryState> {
    let sigma = mask.noise_rel_sigma;
    let phase: Vec<f64> = mask
        .phase_row(y_index)?
        .into_iter()
        .map(|p| {
            let xi: f64 = rng.sample(StandardNormal);
            p * (1.0 + sigma * xi)
        })
        .collect();
    apply_phase_profile(state, &phase)
}

/// ρ(z) ← ρ(z)·e^{iφ(z)}.
pub fn apply_phase_profile(state: &MemoryState, phase: &[f64]) -> Result<MemoryState> {
    let n = state.coherence.grid().count();
    if phase.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: phase.len() });
    }
    let mut out = state.clone();
    out.coherence.values_mut().iter_mut().zip(phase).for_each(|(r, p)| *r *= C64::from_polar(1.0, *p));
    Ok(out)
}

/// Mean readout intensity exp(−γφ₀²), γ = (σ_I/I₀)², for each imprinted phase φ₀.
pub fn dephasing_envelope(mask: &StarkMask, phi0: &[f64]) -> Vec<f64> {
    let gamma = mask.noise_rel_sigma.powi(2);
    phi0.iter().map(|p| (-gamma * p * p).exp()).collect()
}

const DRAWS_PER_TASK: usize = 8192;

/// Monte-Carlo estimate of |⟨e^{iφ₀(1+ξ)}⟩|², ξ ~ N(0, σ²), with common draws for all φ₀.
///
/// The draws are split into fixed-size tasks, each with its own ChaCha stream of `seed`,
/// so the result does not depend on the number of threads.
pub fn monte_carlo_envelope(sigma: f64, phi0: &[f64], draws: usize, seed: u64) -> Vec<f64> {
    let tasks = draws.div_ceil(DRAWS_PER_TASK);
    let partial: Vec<Vec<C64>> = (0..tasks)
        .into_par_iter()
        .map(|task| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(task as u64);
            let count = DRAWS_PER_TASK.min(draws - task * DRAWS_PER_TASK);
            let mut acc = vec![C64::new(0.0, 0.0); phi0.len()];
            for _ in 0..count {
                let xi: f64 = rng.sample(StandardNormal);
                for (a, p) in acc.iter_mut().zip(phi0) {
                    *a += C64::from_polar(1.0, p * sigma * xi);
                }
            }
            acc
        })
        .collect();
    (0..phi0.len())
        .map(|i| {
            let sum: C64 = partial.iter().map(|p| p[i]).sum();
            (sum / draws as f64).norm_sqr()
        })
        .collect()
}

/// Least-squares slope of ln(envelope) against φ₀², returned as the positive rate γ.
pub fn fit_dephasing_rate(phi0: &[f64], envelope: &[f64]) -> Result<f64> {
    if phi0.len() != envelope.len() {
        return Err(Error::DimensionMismatch { expected: phi0.len(), got: envelope.len() });
    }
    if phi0.len() < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: phi0.len() });
    }
    if let Some((index, &value)) = envelope.iter().enumerate().find(|(_, e)| !(**e > 0.0)) {
        return Err(Error::NonPositiveSample { index, value });
    }
    let xs: Vec<f64> = phi0.iter().map(|p| p * p).collect();
    let ys: Vec<f64> = envelope.iter().map(|e| e.ln()).collect();
    Ok(-linear_fit(&xs, &ys).0)
}

/// Ordinary least squares y = a·x + b, returning (a, b).
pub(crate) fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let a = sxy / sxx;
    (a, my - a * mx)
}

/// Fraction of the image maximum below which pixels count as background.
pub const FIDELITY_THRESHOLD: f64 = 0.02;

/// Overlap fidelity ⟨√I_d·√I_a⟩/√(⟨I_d⟩⟨I_a⟩) after thresholding each image.
pub fn fidelity(i_d: &RealImage, i_a: &RealImage) -> Result<f64> {
    fidelity_with_threshold(i_d, i_a, FIDELITY_THRESHOLD)
}

/// [`fidelity`] with an explicit background threshold (fraction of each image's maximum).
pub fn fidelity_with_threshold(i_d: &RealImage, i_a: &RealImage, threshold: f64) -> Result<f64> {
    i_d.same_shape(i_a)?;
    let d = thresholded(i_d, threshold)?;
    let a = thresholded(i_a, threshold)?;
    let cross: f64 = d.iter().zip(&a).map(|(x, y)| (x * y).sqrt()).sum();
    let sd: f64 = d.iter().sum();
    let sa: f64 = a.iter().sum();
    Ok((cross / (sd * sa).sqrt()).clamp(0.0, 1.0))
}

fn thresholded(img: &RealImage, threshold: f64) -> Result<Vec<f64>> {
    let max = img.data.iter().copied().fold(0.0f64, f64::max);
    if !(max > 0.0) {
        return Err(Error::ZeroImage);
    }
    let cut = threshold * max;
    Ok(img.data.iter().map(|&v| if v < cut { 0.0 } else { v }).collect())
}

/// Camera image of the signal interfered with a tilted plane-wave reference.
#[derive(Debug, Clone, PartialEq)]
pub struct FringeImage {
    pub intensity: RealImage,
    /// Reference wavevector (K_x, K_y) in rad/pixel.
    pub carrier: (f64, f64),
    pub reference_amp: f64,
}

fn carrier_phase(carrier: (f64, f64), row: usize, col: usize) -> f64 {
    carrier.0 * col as f64 + carrier.1 * row as f64
}

/// I = |h + A₀e^{iK₀·r}|² with r = (column, row) in pixels.
pub fn synthesize_fringes(h: &ComplexImage, reference_amp: f64, carrier: (f64, f64)) -> FringeImage {
    let intensity = Image::from_fn(h.rows, h.cols, |r, c| {
        (h.get(r, c) + C64::from_polar(reference_amp, carrier_phase(carrier, r, c))).norm_sqr()
    });
    FringeImage { intensity, carrier, reference_amp }
}

/// Fraction of sideband energy that must lie within the separation radius.
const SIDEBAND_ENERGY_FRACTION: f64 = 0.95;

/// Recovers h from a fringe image by isolating the sideband at +K₀.
///
/// The sideband is cut with a rectangular window of half-width |K₀|/2 per axis, shifted
/// to baseband and divided by A₀. Fails if the sideband's 95%-energy radius exceeds |K₀|/2
/// or the window does not fit inside the sampled band.
pub fn demodulate(img: &FringeImage) -> Result<ComplexImage> {
    let (rows, cols) = (img.intensity.rows, img.intensity.cols);
    let (kx, ky) = img.carrier;
    let kmag = kx.hypot(ky);
    if !(img.reference_amp > 0.0) {
        return Err(Error::param("reference_amp", "must be positive"));
    }
    let half = 0.5 * kmag;
    if kx.abs() + half > PI || ky.abs() + half > PI {
        return Err(Error::SidebandOverlap { carrier: kmag, bandwidth: half });
    }
    let fft = Fft2::new(rows, cols);
    let mut spec: Vec<C64> = img.intensity.data.iter().map(|&v| C64::new(v, 0.0)).collect();
    fft.forward(&mut spec);

    let dkx = 2.0 * PI / cols as f64;
    let dky = 2.0 * PI / rows as f64;
    let wave = |i: usize| (signed_index(i % cols, cols) as f64 * dkx, signed_index(i / cols, rows) as f64 * dky);

    // Energy of the sideband half-plane (closer to +K₀ than to the baseband or −K₀).
    let mut radial: Vec<(f64, f64)> = Vec::new();
    for (i, v) in spec.iter().enumerate() {
        let (qx, qy) = wave(i);
        let d_plus = (qx - kx).hypot(qy - ky);
        if d_plus < qx.hypot(qy) && d_plus < (qx + kx).hypot(qy + ky) {
            radial.push((d_plus, v.norm_sqr()));
        }
    }
    radial.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total: f64 = radial.iter().map(|r| r.1).sum();
    if total > 0.0 {
        let mut acc = 0.0;
        let radius = radial
            .iter()
            .find(|r| {
                acc += r.1;
                acc >= SIDEBAND_ENERGY_FRACTION * total
            })
            .map_or(0.0, |r| r.0);
        if radius > half {
            return Err(Error::SidebandOverlap { carrier: kmag, bandwidth: radius });
        }
    }

    for (i, v) in spec.iter_mut().enumerate() {
        let (qx, qy) = wave(i);
        if (qx - kx).abs() > half || (qy - ky).abs() > half {
            *v = C64::new(0.0, 0.0);
        }
    }
    fft.inverse(&mut spec);
    // The +K₀ sideband carries A₀·h*·e^{iK₀r}.
    let data = spec
        .iter()
        .enumerate()
        .map(|(i, v)| {
            (v * C64::from_polar(1.0 / img.reference_amp, -carrier_phase(img.carrier, i / cols, i % cols))).conj()
        })
        .collect();
    Image::new(rows, cols, data)
}

/// Removes 2π jumps from a phase sequence.
pub fn unwrap_phase(phase: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(phase.len());
    let mut offset = 0.0;
    for (i, &p) in phase.iter().enumerate() {
        if i > 0 {
            let d = p - phase[i - 1];
            offset -= 2.0 * PI * (d / (2.0 * PI)).round();
        }
        out.push(p + offset);
    }
    out
}

/// Focal length f of a lens phase −k·r²/(2f) carried by `field`, sampled at `pixel` pitch.
///
/// Phase differences between neighbouring pixels are fitted per axis against the pixel
/// index, so no unwrapping is needed. Pixels below `floor`·max|h| are ignored.
pub fn fit_focal_length(field: &ComplexImage, pixel: f64, wavelength: f64, floor: f64) -> Result<f64> {
    let max = field.data.iter().map(|v| v.norm()).fold(0.0f64, f64::max);
    if !(max > 0.0) {
        return Err(Error::ZeroImage);
    }
    let cut = floor * max;
    let (mut xs, mut dx, mut ys, mut dy) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for r in 0..field.rows {
        for c in 0..field.cols {
            let h = field.get(r, c);
            if h.norm() < cut {
                continue;
            }
            if c + 1 < field.cols && field.get(r, c + 1).norm() >= cut {
                xs.push(2.0 * c as f64 + 1.0);
                dx.push((field.get(r, c + 1) * h.conj()).arg());
            }
            if r + 1 < field.rows && field.get(r + 1, c).norm() >= cut {
                ys.push(2.0 * r as f64 + 1.0);
                dy.push((field.get(r + 1, c) * h.conj()).arg());
            }
        }
    }
    let samples = xs.len().min(ys.len());
    if samples < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: samples });
    }
    let curvature = 0.5 * (linear_fit(&xs, &dx).0 + linear_fit(&ys, &dy).0);
    let k = 2.0 * PI / wavelength;
    Ok(-k * pixel * pixel / (2.0 * curvature))
}

/// Far-field 1/e² intensity radius behind a Fourier lens of focal length `fourier_focal`
/// for a spin wave exp(−y²/w²) carrying the net quadratic phase of two lenses.
pub fn farfield_waist(
    phase_lens_power: f64,
    stark_lens_power: f64,
    cloud_waist: f64,
    wavelength: f64,
    fourier_focal: f64,
) -> f64 {
    let k = 2.0 * PI / wavelength;
    let power = phase_lens_power + stark_lens_power;
    let chirp = 0.5 * k * power * cloud_waist * cloud_waist;
    wavelength * fourier_focal / (PI * cloud_waist) * (1.0 + chirp * chirp).sqrt()
}
