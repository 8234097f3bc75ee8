//! JSON reports and CSV tables.
//!
//! Floats are written in shortest round-trip form, so identical runs produce
//! byte-identical files.

use std::fs;
use std::path::Path;

use serde::Serialize;
use torkam_core::diophantine::DiophantineCert;
use torkam_core::quantize::TorusOperator;

use crate::config::{ExperimentConfig, Mode};
use crate::error::{RunError, RunResult};
use crate::pipeline::Outcome;
use crate::validate::Validation;

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub mode: Mode,
    pub seed: u64,
    pub config: ExperimentConfig,
    pub certificate: DiophantineCert,
    pub validation: Validation,
    pub result: Outcome,
}

/// A named CSV table with a header row.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Table { name: name.into(), header: header.iter().map(|h| (*h).into()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> RunResult<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        let bytes = w.into_inner().map_err(|e| RunError::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

/// Shortest round-trip float text.
pub fn num(x: f64) -> String {
    format!("{x:e}")
}

pub fn label(k: &[i32]) -> String {
    let parts: Vec<String> = k.iter().map(i32::to_string).collect();
    parts.join(" ")
}

/// Matrix export: one row per matrix row, `re,im` interleaved per column.
pub fn matrix_table(name: &str, op: &TorusOperator) -> Table {
    let n = op.size();
    let header: Vec<String> = (0..n).flat_map(|j| [format!("re{j}"), format!("im{j}")]).collect();
    let mut t = Table { name: name.into(), header, rows: Vec::with_capacity(n) };
    for i in 0..n {
        t.rows.push((0..n).flat_map(|j| { let z = op.get(i, j); [num(z.re), num(z.im)] }).collect());
    }
    t
}

pub fn report_json(report: &Report) -> RunResult<String> {
    let mut s = serde_json::to_string_pretty(report)?;
    s.push('\n');
    Ok(s)
}

/// Writes `report.json` and one `<name>.csv` per table into `dir`.
pub fn write_artifacts(dir: &Path, report: &Report, tables: &[Table]) -> RunResult<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("report.json"), report_json(report)?)?;
    for t in tables {
        fs::write(dir.join(format!("{}.csv", t.name)), t.to_csv()?)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct Diagnostic<'a> {
    status: &'a str,
    exit_code: u8,
    kind: String,
    message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    validation: Option<&'a Validation>,
}

/// The JSON written as `error.json` when a run fails.
pub fn diagnostic_json(err: &RunError, validation: Option<&Validation>) -> String {
    let d = Diagnostic { status: "error", exit_code: err.exit_code(), kind: err.kind(), message: err.to_string(), validation };
    let mut s = serde_json::to_string_pretty(&d).unwrap_or_else(|_| "{\"status\": \"error\"}".into());
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tables_quote_and_format_deterministically() {
        let mut t = Table::new("x", &["label", "value"]);
        t.push(vec![label(&[1, -2]), num(0.1)]);
        t.push(vec![label(&[0]), num(-1.5e-300)]);
        assert_eq!(t.to_csv().unwrap(), "label,value\n1 -2,1e-1\n0,-1.5e-300\n");
    }
}
