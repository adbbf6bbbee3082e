//! Scenario files: TOML with `kind`, `seed`, optional `description` and `output_dir`, and a
//! flat `[params]` table whose keys carry their unit as a suffix.

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::path::PathBuf;

use toml::{Table, Value};

use crate::failure::Failure;

/// Unit named by a parameter key suffix. Frequencies are angular: `_MHz` means 2π·10⁶ rad/s.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Unit {
    Dimensionless,
    MegahertzPerCm,
    MegahertzPerUs,
    Gigahertz,
    Megahertz,
    Kilohertz,
    PerCm,
    PerUs,
    Microsecond,
    Nanosecond,
    Centimeter,
    Micrometer,
    Nanometer,
    Degree,
    Microkelvin,
    Radian,
    RadianPerPixel,
    Pixel,
}

/// Suffixes checked longest first so that `_MHz_per_cm` is not read as `_per_cm`.
const SUFFIXES: &[(&str, Unit)] = &[
    ("_MHz_per_cm", Unit::MegahertzPerCm),
    ("_MHz_per_us", Unit::MegahertzPerUs),
    ("_rad_per_px", Unit::RadianPerPixel),
    ("_per_cm", Unit::PerCm),
    ("_per_us", Unit::PerUs),
    ("_GHz", Unit::Gigahertz),
    ("_MHz", Unit::Megahertz),
    ("_kHz", Unit::Kilohertz),
    ("_us", Unit::Microsecond),
    ("_ns", Unit::Nanosecond),
    ("_cm", Unit::Centimeter),
    ("_um", Unit::Micrometer),
    ("_nm", Unit::Nanometer),
    ("_deg", Unit::Degree),
    ("_uK", Unit::Microkelvin),
    ("_rad", Unit::Radian),
    ("_px", Unit::Pixel),
];

impl Unit {
    pub fn of_key(key: &str) -> Unit {
        SUFFIXES.iter().find(|(s, _)| key.ends_with(s)).map_or(Unit::Dimensionless, |(_, u)| *u)
    }

    /// Factor taking a value in this unit to SI (rad/s, s, m, rad, K).
    pub fn to_si(self) -> f64 {
        let angular = 2.0 * PI;
        match self {
            Unit::Dimensionless | Unit::Radian | Unit::RadianPerPixel | Unit::Pixel => 1.0,
            Unit::MegahertzPerCm => angular * 1e6 / 1e-2,
            Unit::MegahertzPerUs => angular * 1e6 / 1e-6,
            Unit::Gigahertz => angular * 1e9,
            Unit::Megahertz => angular * 1e6,
            Unit::Kilohertz => angular * 1e3,
            Unit::PerCm => 1e2,
            Unit::PerUs => 1e6,
            Unit::Microsecond => 1e-6,
            Unit::Nanosecond => 1e-9,
            Unit::Centimeter => 1e-2,
            Unit::Micrometer => 1e-6,
            Unit::Nanometer => 1e-9,
            Unit::Degree => PI / 180.0,
            Unit::Microkelvin => 1e-6,
        }
    }
}

/// Accepted interval of a parameter, in the units of its key.
#[derive(Debug, Clone, Copy)]
pub struct Bounds {
    lo: f64,
    hi: f64,
    lo_open: bool,
}

impl Bounds {
    /// lo ≤ x ≤ hi.
    pub const fn closed(lo: f64, hi: f64) -> Self {
        Self { lo, hi, lo_open: false }
    }

    /// 0 < x ≤ hi.
    pub const fn positive(hi: f64) -> Self {
        Self { lo: 0.0, hi, lo_open: true }
    }

    fn contains(&self, x: f64) -> bool {
        let above = if self.lo_open { x > self.lo } else { x >= self.lo };
        above && x <= self.hi
    }

    fn describe(&self) -> String {
        format!("{}{}, {}]", if self.lo_open { "(" } else { "[" }, self.lo, self.hi)
    }
}

/// A parsed scenario before kind-specific validation.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub kind: String,
    pub seed: u64,
    pub description: Option<String>,
    pub output_dir: Option<PathBuf>,
    pub params: Table,
}

const TOP_LEVEL_KEYS: &[&str] = &["kind", "seed", "description", "output_dir", "params"];

impl Scenario {
    pub fn parse(name: String, text: &str) -> Result<Self, Failure> {
        let table: Table = text.parse().map_err(|e: toml::de::Error| {
            let at = e.span().map(|s| format!(" at line {}", 1 + text[..s.start].matches('\n').count()));
            Failure::Parse(format!("{}{}", e.message().trim(), at.unwrap_or_default()))
        })?;
        if let Some(key) = table.keys().find(|k| !TOP_LEVEL_KEYS.contains(&k.as_str())) {
            return Err(Failure::Validation(format!("unknown top-level key `{key}`")));
        }
        let kind = match table.get("kind") {
            Some(Value::String(s)) => s.clone(),
            Some(_) => return Err(Failure::Validation("`kind` must be a string".into())),
            None => return Err(Failure::Validation("missing `kind`".into())),
        };
        let seed = match table.get("seed") {
            Some(Value::Integer(i)) if *i >= 0 => *i as u64,
            Some(_) => return Err(Failure::Validation("`seed` must be a non-negative integer".into())),
            None => return Err(Failure::Validation("missing `seed`".into())),
        };
        let description = match table.get("description") {
            Some(Value::String(s)) => Some(s.clone()),
            Some(_) => return Err(Failure::Validation("`description` must be a string".into())),
            None => None,
        };
        let output_dir = match table.get("output_dir") {
            Some(Value::String(s)) if !s.is_empty() => Some(PathBuf::from(s)),
            Some(_) => return Err(Failure::Validation("`output_dir` must be a non-empty string".into())),
            None => None,
        };
        let params = match table.get("params") {
            Some(Value::Table(t)) => t.clone(),
            Some(_) => return Err(Failure::Validation("`params` must be a table".into())),
            None => Table::new(),
        };
        Ok(Self { name, kind, seed, description, output_dir, params })
    }
}

/// Reads parameters out of a `[params]` table, converting units and recording the resolved
/// values (in key units) for the manifest.
#[derive(Debug)]
pub struct Params {
    raw: Table,
    used: BTreeSet<String>,
    resolved: Table,
}

fn number(value: &Value) -> Option<f64> {
    match value {
        Value::Float(x) => Some(*x),
        Value::Integer(i) => Some(*i as f64),
        _ => None,
    }
}

impl Params {
    pub fn new(raw: Table) -> Self {
        Self { raw, used: BTreeSet::new(), resolved: Table::new() }
    }

    fn take(&mut self, key: &str) -> Option<Value> {
        self.used.insert(key.to_string());
        self.raw.get(key).cloned()
    }

    fn check(key: &str, x: f64, bounds: Bounds) -> Result<f64, Failure> {
        if !x.is_finite() || !bounds.contains(x) {
            return Err(Failure::Validation(format!("`{key}` = {x} outside {}", bounds.describe())));
        }
        Ok(x)
    }

    /// A real parameter in SI units; `default = None` makes it required.
    pub fn real(&mut self, key: &str, default: Option<f64>, bounds: Bounds) -> Result<f64, Failure> {
        let x = match self.take(key) {
            Some(v) => number(&v).ok_or_else(|| Failure::Validation(format!("`{key}` must be a number")))?,
            None => default.ok_or_else(|| Failure::Validation(format!("missing parameter `{key}`")))?,
        };
        let x = Self::check(key, x, bounds)?;
        self.resolved.insert(key.into(), Value::Float(x));
        Ok(x * Unit::of_key(key).to_si())
    }

    /// A real parameter that must also be non-zero.
    pub fn nonzero(&mut self, key: &str, default: Option<f64>, bounds: Bounds) -> Result<f64, Failure> {
        let x = self.real(key, default, bounds)?;
        if x == 0.0 {
            return Err(Failure::Validation(format!("`{key}` must be non-zero")));
        }
        Ok(x)
    }

    pub fn count(&mut self, key: &str, default: Option<usize>, lo: usize, hi: usize) -> Result<usize, Failure> {
        let n = match self.take(key) {
            Some(Value::Integer(i)) => i,
            Some(_) => return Err(Failure::Validation(format!("`{key}` must be an integer"))),
            None => default.ok_or_else(|| Failure::Validation(format!("missing parameter `{key}`")))? as i64,
        };
        if n < lo as i64 || n > hi as i64 {
            return Err(Failure::Validation(format!("`{key}` = {n} outside [{lo}, {hi}]")));
        }
        self.resolved.insert(key.into(), Value::Integer(n));
        Ok(n as usize)
    }

    pub fn flag(&mut self, key: &str, default: bool) -> Result<bool, Failure> {
        let b = match self.take(key) {
            Some(Value::Boolean(b)) => b,
            Some(_) => return Err(Failure::Validation(format!("`{key}` must be true or false"))),
            None => default,
        };
        self.resolved.insert(key.into(), Value::Boolean(b));
        Ok(b)
    }

    pub fn choice(&mut self, key: &str, default: &'static str, options: &[&'static str]) -> Result<&'static str, Failure> {
        let s = match self.take(key) {
            Some(Value::String(s)) => s,
            Some(_) => return Err(Failure::Validation(format!("`{key}` must be a string"))),
            None => default.to_string(),
        };
        let chosen = options
            .iter()
            .find(|o| **o == s)
            .ok_or_else(|| Failure::Validation(format!("`{key}` = {s:?} is not one of {}", options.join(", "))))?;
        self.resolved.insert(key.into(), Value::String(s));
        Ok(chosen)
    }

    /// A non-empty list of reals in SI units, each within `bounds`.
    pub fn list(&mut self, key: &str, default: &[f64], bounds: Bounds, max_len: usize) -> Result<Vec<f64>, Failure> {
        let xs = match self.take(key) {
            Some(Value::Array(items)) => items
                .iter()
                .map(|v| number(v).ok_or_else(|| Failure::Validation(format!("`{key}` must hold numbers"))))
                .collect::<Result<Vec<_>, _>>()?,
            Some(_) => return Err(Failure::Validation(format!("`{key}` must be an array"))),
            None => default.to_vec(),
        };
        if xs.is_empty() || xs.len() > max_len {
            return Err(Failure::Validation(format!("`{key}` must hold 1 to {max_len} values")));
        }
        for &x in &xs {
            Self::check(key, x, bounds)?;
        }
        self.resolved.insert(key.into(), Value::Array(xs.iter().map(|x| Value::Float(*x)).collect()));
        let scale = Unit::of_key(key).to_si();
        Ok(xs.into_iter().map(|x| x * scale).collect())
    }

    /// Fails on keys that no reader asked for; returns the resolved table.
    pub fn finish(self) -> Result<Table, Failure> {
        if let Some(key) = self.raw.keys().find(|k| !self.used.contains(*k)) {
            return Err(Failure::Validation(format!("unknown parameter `{key}`")));
        }
        Ok(self.resolved)
    }
}
