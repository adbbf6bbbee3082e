//! Result files: `#`-headed columnar tables, a `key: value` summary and a TOML manifest.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use toml::{Table, Value};

use crate::failure::Failure;

/// One `.dat` file.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub name: String,
    /// Column headers, each `name[unit]`.
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Trace {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Self { name: name.into(), columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn render(&self) -> String {
        let mut out = format!("# {}\n", self.columns.join("\t"));
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|x| format!("{x:e}")).collect();
            out.push_str(&cells.join("\t"));
            out.push('\n');
        }
        out
    }
}

/// Formats a headline number: plain decimals in a readable range, scientific otherwise.
pub fn number(x: f64) -> String {
    if x == 0.0 || (1e-4..1e6).contains(&x.abs()) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

/// Everything a scenario produces, held in memory until all of it can be written.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Artifacts {
    pub summary: Vec<(String, String)>,
    pub traces: Vec<Trace>,
}

impl Artifacts {
    pub fn metric(&mut self, key: &str, value: f64) {
        self.summary.push((key.into(), number(value)));
    }

    pub fn note(&mut self, key: &str, value: impl ToString) {
        self.summary.push((key.into(), value.to_string()));
    }

    pub fn list(&mut self, key: &str, values: &[f64]) {
        let joined: Vec<String> = values.iter().map(|x| number(*x)).collect();
        self.summary.push((key.into(), joined.join(", ")));
    }

    pub fn render_summary(&self) -> String {
        self.summary.iter().fold(String::new(), |mut out, (k, v)| {
            let _ = writeln!(out, "{k}: {v}");
            out
        })
    }
}

/// The resolved scenario echoed next to the results.
pub fn manifest(name: &str, kind: &str, seed: u64, description: Option<&str>, params: &Table) -> String {
    let mut table = Table::new();
    table.insert("name".into(), Value::String(name.into()));
    table.insert("kind".into(), Value::String(kind.into()));
    table.insert("seed".into(), Value::Integer(seed as i64));
    if let Some(d) = description {
        table.insert("description".into(), Value::String(d.into()));
    }
    table.insert("generator".into(), Value::String(format!("qmemlab {}", env!("CARGO_PKG_VERSION"))));
    table.insert("params".into(), Value::Table(params.clone()));
    toml::to_string(&table).expect("manifest tables always serialize")
}

/// Writes all files into a staging directory next to `dir`, then swaps it into place, so a
/// failure never leaves a partial result directory behind.
pub fn commit(dir: &Path, manifest: &str, artifacts: &Artifacts) -> Result<(), Failure> {
    let io = |what: &str, p: &Path, e: std::io::Error| Failure::Io(format!("{what} {}: {e}", p.display()));
    let parent = dir.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(parent).map_err(|e| io("cannot create", parent, e))?;
    let leaf = dir.file_name().ok_or_else(|| Failure::Io(format!("invalid output directory {}", dir.display())))?;
    let staging: PathBuf = parent.join(format!(".{}.partial-{}", leaf.to_string_lossy(), std::process::id()));
    if staging.exists() {
        fs::remove_dir_all(&staging).map_err(|e| io("cannot clear", &staging, e))?;
    }
    let result = (|| {
        fs::create_dir(&staging).map_err(|e| io("cannot create", &staging, e))?;
        let write = |file: &str, text: &str| {
            let p = staging.join(file);
            fs::write(&p, text).map_err(|e| io("cannot write", &p, e))
        };
        write("manifest.toml", manifest)?;
        write("summary.txt", &artifacts.render_summary())?;
        for t in &artifacts.traces {
            write(&format!("{}.dat", t.name), &t.render())?;
        }
        if dir.exists() {
            fs::remove_dir_all(dir).map_err(|e| io("cannot replace", dir, e))?;
        }
        fs::rename(&staging, dir).map_err(|e| io("cannot move results to", dir, e))
    })();
    if result.is_err() {
        let _ = fs::remove_dir_all(&staging);
    }
    result
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trace_has_header_and_round_trip_numbers() {
        let mut t = Trace::new("x", &["time[us]", "value[1]"]);
        t.push(vec![0.1, 1.0 / 3.0]);
        let text = t.render();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("# time[us]\tvalue[1]"));
        let parsed: Vec<f64> = lines.next().unwrap().split('\t').map(|s| s.parse().unwrap()).collect();
        assert_eq!(parsed, vec![0.1, 1.0 / 3.0]);
    }

    #[test]
    fn numbers_switch_to_scientific_outside_readable_range() {
        assert_eq!(number(0.5), "0.5");
        assert_eq!(number(1e-9), "1e-9");
        assert_eq!(number(0.0), "0");
    }

    #[test]
    fn commit_replaces_existing_results() {
        let root = tempfile::tempdir().unwrap();
        let dir = root.path().join("out");
        fs::create_dir(&dir).unwrap();
        fs::write(dir.join("stale.dat"), "old").unwrap();
        let mut a = Artifacts::default();
        a.metric("efficiency", 0.5);
        commit(&dir, "kind = \"x\"\n", &a).unwrap();
        assert!(!dir.join("stale.dat").exists());
        assert_eq!(fs::read_to_string(dir.join("summary.txt")).unwrap(), "efficiency: 0.5\n");
        assert_eq!(fs::read_dir(root.path()).unwrap().count(), 1);
    }
}
