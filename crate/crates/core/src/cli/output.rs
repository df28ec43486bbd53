//! CSV files with a `#`-prefixed metadata header.

use std::fmt::Display;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use super::config::RunConfig;

/// Bumped whenever a column set changes.
pub const SCHEMA_VERSION: u32 = 1;
pub const TOOLKIT_VERSION: &str = env!("CARGO_PKG_VERSION");
/// Written into the output directory while a run is unfinished or failed.
pub const INCOMPLETE_MARKER: &str = "INCOMPLETE";

/// SHA-256 of the rendered config, ignoring the output directory.
pub fn config_hash(config: &RunConfig) -> String {
    let canonical = RunConfig { out: RunConfig::default().out, ..config.clone() };
    hex::encode(Sha256::digest(canonical.render().as_bytes()))
}

/// Shortest round-trip text for a float, in scientific notation outside
/// `[1e-4, 1e16)`.
pub fn fmt_float(x: f64) -> String {
    let a = x.abs();
    if a == 0.0 || !a.is_finite() || (1e-4..1e16).contains(&a) {
        x.to_string()
    } else {
        format!("{x:e}")
    }
}

/// Shared header fields for every file written by one run.
#[derive(Debug, Clone)]
pub struct Provenance {
    pub command: String,
    pub config_hash: String,
    pub master_seed: u64,
}

impl Provenance {
    pub fn new(command: &str, config: &RunConfig) -> Self {
        Self { command: command.to_string(), config_hash: config_hash(config), master_seed: config.seed }
    }
}

/// An in-memory CSV table; rows are rendered with `Display`, so floats use
/// the shortest representation that round-trips.
#[derive(Debug, Clone)]
pub struct CsvTable {
    schema: String,
    units: String,
    columns: Vec<String>,
    rows: Vec<String>,
}

impl CsvTable {
    pub fn new(schema: &str, units: &str, columns: Vec<String>) -> Self {
        Self { schema: schema.to_string(), units: units.to_string(), columns, rows: Vec::new() }
    }

    pub fn with_columns(schema: &str, units: &str, columns: &[&str]) -> Self {
        Self::new(schema, units, columns.iter().map(|c| c.to_string()).collect())
    }

    pub fn push<I, T>(&mut self, fields: I)
    where
        I: IntoIterator<Item = T>,
        T: Display,
    {
        let row: Vec<String> = fields.into_iter().map(|f| f.to_string()).collect();
        assert_eq!(row.len(), self.columns.len(), "row width does not match the {} schema", self.schema);
        self.rows.push(row.join(","));
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn render(&self, provenance: &Provenance) -> String {
        let mut s = String::new();
        s.push_str(&format!("# spindeco {TOOLKIT_VERSION}\n"));
        s.push_str(&format!("# command: {}\n", provenance.command));
        s.push_str(&format!("# schema: {} v{SCHEMA_VERSION}\n", self.schema));
        s.push_str(&format!("# config_sha256: {}\n", provenance.config_hash));
        s.push_str(&format!("# master_seed: {}\n", provenance.master_seed));
        s.push_str(&format!("# units: {}\n", self.units));
        s.push_str(&self.columns.join(","));
        s.push('\n');
        for row in &self.rows {
            s.push_str(row);
            s.push('\n');
        }
        s
    }

    pub fn write(&self, dir: &Path, name: &str, provenance: &Provenance) -> io::Result<PathBuf> {
        let path = dir.join(name);
        fs::write(&path, self.render(provenance))?;
        Ok(path)
    }
}

/// Splits a CSV file into its column header and its rows, skipping comment and
/// blank lines. Rows carry their 1-based line number.
pub fn read_csv(text: &str) -> (Vec<String>, Vec<(usize, Vec<String>)>) {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim_start().starts_with('#') && !l.trim().is_empty());
    let header = lines.next().map(|(_, l)| l.split(',').map(|c| c.trim().to_string()).collect()).unwrap_or_default();
    let rows = lines.map(|(i, l)| (i + 1, l.split(',').map(|c| c.trim().to_string()).collect())).collect();
    (header, rows)
}

/// Everything after the metadata comments, for byte comparisons.
pub fn csv_body(text: &str) -> String {
    text.lines().filter(|l| !l.starts_with('#')).map(|l| format!("{l}\n")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_and_rows() {
        let cfg = RunConfig::default();
        let mut t = CsvTable::with_columns("demo", "t in gt", &["t", "xi"]);
        t.push([0.0, 0.5].map(fmt_float));
        t.push([0.05, 0.25].map(fmt_float));
        let text = t.render(&Provenance::new("simulate", &cfg));
        assert!(text.starts_with("# spindeco "));
        assert!(text.contains("# config_sha256: "));
        assert!(text.contains("# master_seed: 0\n"));
        assert_eq!(csv_body(&text), "t,xi\n0,0.5\n0.05,0.25\n");
        let (header, rows) = read_csv(&text);
        assert_eq!(header, vec!["t", "xi"]);
        assert_eq!(rows[1].1, vec!["0.05", "0.25"]);
        assert_eq!(rows[1].0, 9);
    }

    #[test]
    fn float_format_round_trips() {
        for x in [0.0, 1.5, -2.25e-9, 4.0e14, 3.1e17, 1e-300, f64::INFINITY] {
            assert_eq!(fmt_float(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(fmt_float(1.2e-5), "1.2e-5");
        assert_eq!(fmt_float(0.05), "0.05");
        assert_eq!(fmt_float(4.0e14), "400000000000000");
    }

    #[test]
    fn hash_ignores_output_directory() {
        let a = RunConfig::default();
        let b = RunConfig { out: "elsewhere".into(), ..a.clone() };
        let c = RunConfig { n: 11, ..a.clone() };
        assert_eq!(config_hash(&a), config_hash(&b));
        assert_ne!(config_hash(&a), config_hash(&c));
        assert_eq!(config_hash(&a).len(), 64);
    }
}
