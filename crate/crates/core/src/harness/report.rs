use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::liyau::{BoundReport, LiYauParams};

use super::calibrate::CalibrationReport;
use super::config::SCHEMA_VERSION;

pub const TABLE_HEADER: &str = "scenario,check,x,y,t,lhs,rhs,margin,violated";

/// One line of `table.csv`. Missing coordinates or times stay empty.
#[derive(Debug, Clone, PartialEq)]
pub struct TableRow {
    pub scenario: String,
    pub check: String,
    pub x: Option<f64>,
    pub y: Option<f64>,
    pub t: Option<f64>,
    pub lhs: f64,
    pub rhs: f64,
    pub violated: bool,
}

impl TableRow {
    pub fn margin(&self) -> f64 {
        self.rhs - self.lhs
    }
}

fn num(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else {
        format!("{x}")
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

pub fn format_table(rows: &[TableRow]) -> String {
    let mut out = String::with_capacity(64 * rows.len() + 64);
    out.push_str(TABLE_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.scenario,
            r.check,
            opt(r.x),
            opt(r.y),
            opt(r.t),
            num(r.lhs),
            num(r.rhs),
            num(r.margin()),
            r.violated
        );
    }
    out
}

pub fn write_table(path: &Path, rows: &[TableRow]) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    f.write_all(format_table(rows).as_bytes())?;
    f.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub check: String,
    pub passed: bool,
    /// Failed where the hypotheses hold on a regular scenario.
    pub counts_as_failure: bool,
    pub hypothesis_satisfied: bool,
    pub metrics: BTreeMap<String, f64>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstantSource {
    Config,
    Scenario,
    Calibrated,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResolvedConstants {
    pub c: f64,
    pub kappa: f64,
    pub source: ConstantSource,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Provenance {
    pub crate_version: String,
    pub schema_version: u32,
    pub seed: u64,
    pub resolution: [usize; 2],
    pub num_vertices: usize,
    pub threads: usize,
    pub deterministic: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub timings_seconds: Option<BTreeMap<String, f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub scenario: String,
    pub negative_control: bool,
    pub constants: ResolvedConstants,
    pub params: LiYauParams,
    /// `k(p, 1)` measured on the scenario.
    pub k_value: f64,
    pub hypothesis_satisfied: bool,
    pub checks: Vec<CheckOutcome>,
    pub provenance: Provenance,
}

impl RunReport {
    pub fn failures(&self) -> usize {
        self.checks.iter().filter(|c| c.counts_as_failure).count()
    }

    pub fn check(&self, name: &str) -> Option<&CheckOutcome> {
        self.checks.iter().find(|c| c.check == name)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunSummary {
    pub schema_version: u32,
    pub reports: Vec<RunReport>,
    pub failures: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub calibration: Option<CalibrationReport>,
    /// Phrase used for every bound that passes: the constants are fitted,
    /// not the ones whose existence is asserted.
    pub interpretation: String,
}

impl RunSummary {
    pub fn new(reports: Vec<RunReport>) -> Self {
        RunSummary {
            schema_version: SCHEMA_VERSION,
            failures: reports.iter().map(|r| r.failures()).sum(),
            calibration: None,
            reports,
            interpretation: "passing bounds are consistent with the stated form for the constants used".into(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        i32::from(self.failures > 0)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

pub(crate) fn bound_rows(
    scenario: &str,
    report: &BoundReport,
    coords: impl Fn(usize) -> [f64; 2],
) -> Vec<TableRow> {
    report
        .rows
        .iter()
        .map(|r| {
            let [x, y] = coords(r.vertex);
            TableRow {
                scenario: scenario.to_string(),
                check: report.check.clone(),
                x: Some(x),
                y: Some(y),
                t: Some(r.t),
                lhs: r.lhs,
                rhs: r.rhs,
                violated: r.violated,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_and_formatting() {
        let rows = vec![TableRow {
            scenario: "s".into(),
            check: "c".into(),
            x: Some(0.5),
            y: None,
            t: Some(0.1),
            lhs: 1.0,
            rhs: 3.0,
            violated: false,
        }];
        let text = format_table(&rows);
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("scenario,check,x,y,t,lhs,rhs,margin,violated"));
        assert_eq!(lines.next(), Some("s,c,0.5,,0.1,1,3,2,false"));
    }
}
