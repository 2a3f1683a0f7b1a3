use crate::config::Format;
use crate::error::CliError;
use serde::Serialize;
use serde_json::{json, Map, Value};
use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Real(f64),
    Int(i64),
    Text(String),
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Real(x)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<bool> for Cell {
    fn from(x: bool) -> Self {
        Cell::Text(x.to_string())
    }
}

impl From<&str> for Cell {
    fn from(x: &str) -> Self {
        Cell::Text(x.to_string())
    }
}

impl From<String> for Cell {
    fn from(x: String) -> Self {
        Cell::Text(x)
    }
}

/// Fixed 17-significant-digit formatting; round-trips every f64.
pub fn format_real(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{x:.16e}")
    }
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Real(x) => format_real(*x),
            Cell::Int(i) => i.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Real(x) => serde_json::Number::from_f64(*x).map(Value::Number).unwrap_or(Value::Null),
            Cell::Int(i) => json!(i),
            Cell::Text(s) => json!(s),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Table { name: name.into(), columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width for table {}", self.name);
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<&Cell>> {
        let k = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| &r[k]).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: &str, pass: bool, detail: impl Into<String>) -> Self {
        Check { name: name.into(), pass, detail: detail.into() }
    }

    /// |value/target − 1| ≤ tol.
    pub fn relative(name: &str, value: f64, target: f64, tol: f64) -> Self {
        let err = (value / target - 1.0).abs();
        Check::new(name, err <= tol, format!("{value:e} vs {target:e} (relative error {err:.2e}, tolerance {tol:e})"))
    }

    pub fn bound(name: &str, value: f64, limit: f64) -> Self {
        Check::new(name, value <= limit, format!("{value:e} <= {limit:e}"))
    }
}

#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub tables: Vec<Table>,
    pub reports: Vec<(String, Value)>,
    pub checks: Vec<Check>,
}

impl Outcome {
    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let mut f = fs::File::create(path).map_err(|e| CliError::io(path.display().to_string(), e))?;
    f.write_all(bytes).map_err(|e| CliError::io(path.display().to_string(), e))
}

fn json_bytes(value: &Value) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("JSON values serialize");
    bytes.push(b'\n');
    bytes
}

pub fn csv_bytes(table: &Table) -> Vec<u8> {
    let mut out = format!("# manifest: {MANIFEST_FILE}\n").into_bytes();
    let mut w = csv::Writer::from_writer(&mut out);
    w.write_record(&table.columns).expect("in-memory CSV");
    for row in &table.rows {
        w.write_record(row.iter().map(Cell::csv)).expect("in-memory CSV");
    }
    w.flush().expect("in-memory CSV");
    drop(w);
    out
}

pub fn table_json(table: &Table) -> Value {
    let rows: Vec<Value> = table.rows.iter().map(|r| Value::Array(r.iter().map(Cell::json).collect())).collect();
    json!({ "manifest": MANIFEST_FILE, "columns": table.columns, "rows": rows })
}

/// Write every table and report into `dir`, returning the file names in write order.
pub fn write_outcome(dir: &Path, format: Format, outcome: &Outcome) -> Result<Vec<String>, CliError> {
    let mut names = Vec::new();
    for t in &outcome.tables {
        let (name, bytes) = match format {
            Format::Csv => (format!("{}.csv", t.name), csv_bytes(t)),
            Format::Json => (format!("{}.json", t.name), json_bytes(&table_json(t))),
        };
        write_file(&dir.join(&name), &bytes)?;
        names.push(name);
    }
    for (stem, report) in &outcome.reports {
        let mut body = Map::new();
        body.insert("manifest".into(), json!(MANIFEST_FILE));
        match report {
            Value::Object(m) => body.extend(m.clone()),
            other => {
                body.insert("result".into(), other.clone());
            }
        }
        let name = format!("{stem}.json");
        write_file(&dir.join(&name), &json_bytes(&Value::Object(body)))?;
        names.push(name);
    }
    Ok(names)
}

#[derive(Debug, Clone, Serialize)]
pub struct ErrorRecord {
    pub category: &'static str,
    pub exit_code: i32,
    pub message: String,
}

impl From<&CliError> for ErrorRecord {
    fn from(e: &CliError) -> Self {
        ErrorRecord { category: e.category(), exit_code: e.exit_code(), message: e.to_string() }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Constants {
    pub version: &'static str,
    pub values: BTreeMap<&'static str, f64>,
}

impl Constants {
    pub fn current() -> Self {
        Constants {
            version: ionsim::foundation::CONSTANTS_VERSION,
            values: ionsim::foundation::constants_table().into_iter().collect(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub scenario: String,
    pub status: &'static str,
    pub error: Option<ErrorRecord>,
    pub config: Value,
    pub artifact_version: String,
    pub constants: Constants,
    pub wall_time_s: f64,
    pub outputs: Vec<String>,
    pub checks_passed: usize,
    pub checks_failed: usize,
    pub checks: Vec<Check>,
}

impl RunManifest {
    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        let value = serde_json::to_value(self).expect("manifest serializes");
        write_file(&dir.join(MANIFEST_FILE), &json_bytes(&value))
    }
}
