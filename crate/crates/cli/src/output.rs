//! CSV tables, gates, the run manifest and the summary.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

/// A CSV table with a versioned schema line.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub schema: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, version: u32, columns: &[&str]) -> Self {
        Self {
            name: name.into(),
            schema: format!("plurikit.{name}/{version}"),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn file_name(&self) -> String {
        format!("{}.csv", self.name)
    }

    pub fn write(&self, dir: &Path) -> io::Result<()> {
        let mut f = io::BufWriter::new(fs::File::create(dir.join(self.file_name()))?);
        writeln!(f, "schema={}", self.schema)?;
        let mut w = csv::Writer::from_writer(f);
        w.write_record(&self.columns)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Shortest round-trip rendering, stable across runs.
pub fn num(x: f64) -> String {
    format!("{x:e}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gate {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Gate {
    /// `value <= threshold`.
    pub fn at_most(name: &str, value: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            pass: value <= threshold,
            detail: format!("value={} threshold={}", num(value), num(threshold)),
        }
    }

    /// `value >= threshold`.
    pub fn at_least(name: &str, value: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            pass: value >= threshold,
            detail: format!("value={} min={}", num(value), num(threshold)),
        }
    }

    pub fn check(name: &str, pass: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            pass,
            detail: detail.into(),
        }
    }

    pub fn line(&self) -> String {
        let status = if self.pass { "PASS" } else { "FAIL" };
        format!("{status} {} {}", self.name, self.detail)
    }
}

/// Everything a command produces.
#[derive(Debug, Default, Clone, PartialEq)]
pub struct Outcome {
    pub tables: Vec<Table>,
    pub gates: Vec<Gate>,
    /// Free-form remarks recorded in the manifest.
    pub notes: Vec<String>,
}

impl Outcome {
    pub fn pass(&self) -> bool {
        self.gates.iter().all(|g| g.pass)
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        for g in &self.gates {
            s.push_str(&g.line());
            s.push('\n');
        }
        s
    }
}
