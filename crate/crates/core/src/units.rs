//! Unit helpers. Every rate in the crate is angular (rad/s).

use std::f64::consts::PI;

/// `x` MHz expressed as an angular frequency, 2π·x·10⁶ rad/s.
pub fn mhz(x: f64) -> f64 {
    2.0 * PI * x * 1e6
}

/// `x` GHz expressed as an angular frequency.
pub fn ghz(x: f64) -> f64 {
    2.0 * PI * x * 1e9
}

/// `x` kHz expressed as an angular frequency.
pub fn khz(x: f64) -> f64 {
    2.0 * PI * x * 1e3
}

pub const MICROSECOND: f64 = 1e-6;
pub const CENTIMETER: f64 = 1e-2;
pub const MILLIMETER: f64 = 1e-3;

pub fn degrees(x: f64) -> f64 {
    x.to_radians()
}
