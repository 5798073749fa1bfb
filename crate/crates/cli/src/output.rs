use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use flowtime::tf::BoundAudit;
use serde::Serialize;
use serde_json::{Map, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Float(f64),
    Int(u64),
    Text(String),
    Bool(bool),
    Empty,
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Float(x)
    }
}

impl From<u64> for Cell {
    fn from(x: u64) -> Self {
        Cell::Int(x)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::Int(x as u64)
    }
}

impl From<bool> for Cell {
    fn from(x: bool) -> Self {
        Cell::Bool(x)
    }
}

impl From<&str> for Cell {
    fn from(x: &str) -> Self {
        Cell::Text(x.to_string())
    }
}

impl From<Option<f64>> for Cell {
    fn from(x: Option<f64>) -> Self {
        x.map_or(Cell::Empty, Cell::Float)
    }
}

impl Cell {
    /// CSV text; floats keep 17 significant digits so they round-trip.
    fn text(&self) -> String {
        match self {
            Cell::Float(x) => format!("{x:.16e}"),
            Cell::Int(x) => x.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Bool(b) => b.to_string(),
            Cell::Empty => String::new(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Float(x) => serde_json::Number::from_f64(*x).map_or(Value::Null, Value::Number),
            Cell::Int(x) => Value::from(*x),
            Cell::Text(s) => Value::from(s.clone()),
            Cell::Bool(b) => Value::from(*b),
            Cell::Empty => Value::Null,
        }
    }
}

/// Named table written as `<name>.csv` or `<name>.json`.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: impl Into<String>, columns: &[&'static str]) -> Self {
        Self { name: name.into(), columns: columns.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn write(&self, dir: &Path, format: Format) -> io::Result<PathBuf> {
        match format {
            Format::Csv => {
                let path = dir.join(format!("{}.csv", self.name));
                let mut w = csv::Writer::from_path(&path)?;
                w.write_record(&self.columns)?;
                for row in &self.rows {
                    w.write_record(row.iter().map(Cell::text))?;
                }
                w.flush()?;
                Ok(path)
            }
            Format::Json => {
                let path = dir.join(format!("{}.json", self.name));
                let rows: Vec<Value> = self
                    .rows
                    .iter()
                    .map(|row| {
                        let obj: Map<String, Value> =
                            self.columns.iter().zip(row).map(|(c, v)| (c.to_string(), v.json())).collect();
                        Value::Object(obj)
                    })
                    .collect();
                write_json(&path, &rows)?;
                Ok(path)
            }
        }
    }
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> io::Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(io::Error::other)?;
    text.push('\n');
    fs::write(path, text)
}

/// One bound audit with the context it was run in.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditEntry {
    pub context: String,
    #[serde(flatten)]
    pub audit: BoundAudit,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditSummary {
    pub total: usize,
    pub passed: usize,
    pub failed: usize,
}

/// Everything a workflow produced before it is written out.
#[derive(Debug, Default)]
pub struct RunOutput {
    pub tables: Vec<Table>,
    pub audits: Vec<AuditEntry>,
    /// Scalar results, e.g. moments or error measures.
    pub metrics: BTreeMap<String, f64>,
    /// Rows skipped by design, such as stationary systems.
    pub skipped: usize,
}

impl RunOutput {
    pub fn audit(&mut self, context: impl Into<String>, audit: BoundAudit) {
        self.audits.push(AuditEntry { context: context.into(), audit });
    }

    pub fn metric(&mut self, name: &str, value: f64) {
        self.metrics.insert(name.to_string(), value);
    }

    pub fn failed_audits(&self) -> usize {
        self.audits.iter().filter(|a| !a.audit.passed).count()
    }
}

/// Manifest of a run, always written as `report.json`.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub version: &'static str,
    pub workflow: &'static str,
    pub seed: Option<u64>,
    pub started_unix_s: u64,
    pub wall_time_s: f64,
    pub outputs: Vec<String>,
    pub metrics: BTreeMap<String, f64>,
    pub skipped: usize,
    pub audit_summary: AuditSummary,
    pub audits: Vec<AuditEntry>,
}

impl RunReport {
    pub fn all_passed(&self) -> bool {
        self.audit_summary.failed == 0
    }
}
