//! Run reports and their CSV / JSON serialization.
//!
//! Every report carries the configuration echo, a summary object, one
//! table, and a list of named checks. Floats are written in scientific
//! notation with 17 significant digits so that parsing them back yields the
//! identical `f64`. JSON keys keep insertion order; the wall-time field is
//! always last on its own line so determinism checks can drop it.

use std::fmt::Write as _;

use serde_json::{Map, Value};

use crate::error::{invalid, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Schema version of the report layout.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn parse(s: &str) -> Option<Format> {
        match s {
            "csv" => Some(Format::Csv),
            "json" => Some(Format::Json),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
    Bool(bool),
    Missing,
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Missing, Cell::Num)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Table {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

/// A named pass/fail verdict with the measured quantity behind it.
#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub measured: Option<f64>,
    pub limit: Option<f64>,
}

impl Check {
    pub fn new(name: &str, passed: bool, measured: Option<f64>, limit: Option<f64>) -> Self {
        Check {
            name: name.to_string(),
            passed,
            measured,
            limit,
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunReport {
    pub subcommand: String,
    pub config: Vec<(String, String)>,
    pub summary: Map<String, Value>,
    pub table: Table,
    pub checks: Vec<Check>,
    pub wall_time_s: f64,
}

impl RunReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    fn to_value(&self) -> Value {
        let mut root = Map::new();
        root.insert("schema_version".into(), Value::from(SCHEMA_VERSION));
        root.insert("subcommand".into(), Value::from(self.subcommand.clone()));
        root.insert("artifact_version".into(), Value::from(VERSION));
        let config: Map<String, Value> = self
            .config
            .iter()
            .map(|(k, v)| (k.clone(), Value::from(v.clone())))
            .collect();
        root.insert("config".into(), Value::Object(config));
        root.insert("summary".into(), Value::Object(self.summary.clone()));
        let mut table = Map::new();
        table.insert(
            "columns".into(),
            Value::Array(
                self.table
                    .columns
                    .iter()
                    .cloned()
                    .map(Value::from)
                    .collect(),
            ),
        );
        table.insert(
            "rows".into(),
            Value::Array(
                self.table
                    .rows
                    .iter()
                    .map(|r| Value::Array(r.iter().map(cell_value).collect()))
                    .collect(),
            ),
        );
        root.insert("table".into(), Value::Object(table));
        let checks = self
            .checks
            .iter()
            .map(|c| {
                let mut m = Map::new();
                m.insert("name".into(), Value::from(c.name.clone()));
                m.insert("passed".into(), Value::from(c.passed));
                m.insert("measured".into(), opt_num(c.measured));
                m.insert("limit".into(), opt_num(c.limit));
                Value::Object(m)
            })
            .collect();
        root.insert("checks".into(), Value::Array(checks));
        root.insert("passed".into(), Value::from(self.passed()));
        root.insert("wall_time_s".into(), num(self.wall_time_s));
        Value::Object(root)
    }
}

fn num(v: f64) -> Value {
    serde_json::Number::from_f64(v).map_or(Value::Null, Value::Number)
}

fn opt_num(v: Option<f64>) -> Value {
    v.map_or(Value::Null, num)
}

fn cell_value(c: &Cell) -> Value {
    match c {
        Cell::Num(v) => num(*v),
        Cell::Int(v) => Value::from(*v),
        Cell::Text(s) => Value::from(s.clone()),
        Cell::Bool(b) => Value::from(*b),
        Cell::Missing => Value::Null,
    }
}

/// `{:.16e}`: 17 significant digits, enough to round-trip any `f64`.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

fn check_finite(report: &RunReport) -> Result<()> {
    let table_ok = report.table.rows.iter().flatten().all(|c| match c {
        Cell::Num(v) => v.is_finite(),
        _ => true,
    });
    let checks_ok = report
        .checks
        .iter()
        .all(|c| c.measured.is_none_or(f64::is_finite) && c.limit.is_none_or(f64::is_finite));
    if table_ok && checks_ok && report.wall_time_s.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!(
            "report for `{}` contains non-finite values",
            report.subcommand
        )))
    }
}

pub fn serialize_report(report: &RunReport, format: Format) -> Result<Vec<u8>> {
    check_finite(report)?;
    Ok(match format {
        Format::Json => to_json(report).into_bytes(),
        Format::Csv => to_csv(&report.table).into_bytes(),
    })
}

/// Pretty JSON with fixed key order and 17-digit floats.
pub fn to_json(report: &RunReport) -> String {
    let mut out = String::new();
    write_value(&mut out, &report.to_value(), 0);
    out.push('\n');
    out
}

fn write_value(out: &mut String, v: &Value, indent: usize) {
    let pad = |n: usize| "  ".repeat(n);
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                let _ = write!(out, "{i}");
            } else if let Some(u) = n.as_u64() {
                let _ = write!(out, "{u}");
            } else {
                out.push_str(&format_float(n.as_f64().unwrap_or(f64::NAN)));
            }
        }
        Value::String(s) => out.push_str(&Value::String(s.clone()).to_string()),
        Value::Array(items) => {
            // Rows of scalars stay on one line.
            if items.iter().all(|i| !i.is_array() && !i.is_object()) {
                out.push('[');
                for (k, item) in items.iter().enumerate() {
                    if k > 0 {
                        out.push_str(", ");
                    }
                    write_value(out, item, indent);
                }
                out.push(']');
            } else {
                out.push_str("[\n");
                for (k, item) in items.iter().enumerate() {
                    out.push_str(&pad(indent + 1));
                    write_value(out, item, indent + 1);
                    out.push_str(if k + 1 < items.len() { ",\n" } else { "\n" });
                }
                out.push_str(&pad(indent));
                out.push(']');
            }
        }
        Value::Object(map) => {
            if map.is_empty() {
                out.push_str("{}");
                return;
            }
            out.push_str("{\n");
            for (k, (key, item)) in map.iter().enumerate() {
                out.push_str(&pad(indent + 1));
                out.push_str(&Value::String(key.clone()).to_string());
                out.push_str(": ");
                write_value(out, item, indent + 1);
                out.push_str(if k + 1 < map.len() { ",\n" } else { "\n" });
            }
            out.push_str(&pad(indent));
            out.push('}');
        }
    }
}

fn csv_cell(c: &Cell) -> String {
    match c {
        Cell::Num(v) => format_float(*v),
        Cell::Int(v) => v.to_string(),
        Cell::Text(s) => {
            if s.contains([',', '"', '\n']) {
                format!("\"{}\"", s.replace('"', "\"\""))
            } else {
                s.clone()
            }
        }
        Cell::Bool(b) => b.to_string(),
        Cell::Missing => String::new(),
    }
}

pub fn to_csv(table: &Table) -> String {
    let mut out = table.columns.join(",");
    out.push('\n');
    for row in &table.rows {
        out.push_str(&row.iter().map(csv_cell).collect::<Vec<_>>().join(","));
        out.push('\n');
    }
    out
}

/// Drops the wall-time line of a JSON report.
pub fn strip_wall_time(json: &str) -> String {
    json.lines()
        .filter(|l| !l.trim_start().starts_with("\"wall_time_s\""))
        .collect::<Vec<_>>()
        .join("\n")
}
