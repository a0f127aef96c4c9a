use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::config::{Experiment, ExperimentConfig};
use crate::error::{Error, Result};
use crate::linalg::CMatrix;

/// Column order of the sweep table.
pub const SWEEP_COLUMNS: [&str; 9] = [
    "tau",
    "omega",
    "condition_eq5",
    "infidelity",
    "phase_gap",
    "infidelity_times_tau",
    "gamma_c",
    "r19",
    "r22",
];

/// One τ of a sweep. `r19` is the single-counted retention residual, `r22`
/// the double-counted one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepRow {
    pub tau: f64,
    pub omega: f64,
    pub condition_eq5: f64,
    pub infidelity: f64,
    pub phase_gap: f64,
    pub infidelity_times_tau: f64,
    pub gamma_c: f64,
    pub r19: f64,
    pub r22: f64,
}

impl SweepRow {
    pub fn values(&self) -> [f64; 9] {
        [
            self.tau,
            self.omega,
            self.condition_eq5,
            self.infidelity,
            self.phase_gap,
            self.infidelity_times_tau,
            self.gamma_c,
            self.r19,
            self.r22,
        ]
    }

    pub fn from_values(v: &[f64]) -> Result<Self> {
        let &[tau, omega, condition_eq5, infidelity, phase_gap, infidelity_times_tau, gamma_c, r19, r22] = v else {
            return Err(Error::Shape(format!("sweep row has {} fields, expected 9", v.len())));
        };
        Ok(Self {
            tau,
            omega,
            condition_eq5,
            infidelity,
            phase_gap,
            infidelity_times_tau,
            gamma_c,
            r19,
            r22,
        })
    }
}

/// Matrix stored row by row, each entry a `[re, im]` pair.
pub type MatrixRows = Vec<Vec<[f64; 2]>>;

pub fn matrix_rows(m: &CMatrix) -> MatrixRows {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentReport {
    pub tool_version: String,
    pub experiment: Experiment,
    pub config: ExperimentConfig,
    pub wall_time_s: f64,
    #[serde(default)]
    pub scalars: BTreeMap<String, f64>,
    #[serde(default)]
    pub flags: BTreeMap<String, bool>,
    #[serde(default)]
    pub rows: Vec<SweepRow>,
    #[serde(default)]
    pub matrices: BTreeMap<String, MatrixRows>,
}

impl ExperimentReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn scalar(&self, name: &str) -> Option<f64> {
        self.scalars.get(name).copied()
    }

    /// Fails on the first NaN or infinity, naming where it sits.
    pub fn check_finite(&self) -> Result<()> {
        let bad = |what: String| Err(Error::Kernel(format!("non-finite value in report: {what}")));
        if !self.wall_time_s.is_finite() {
            return bad("wall_time_s".into());
        }
        for (name, v) in &self.scalars {
            if !v.is_finite() {
                return bad(name.clone());
            }
        }
        for (i, row) in self.rows.iter().enumerate() {
            if let Some(j) = row.values().iter().position(|v| !v.is_finite()) {
                return bad(format!("row {i}, column {}", SWEEP_COLUMNS[j]));
            }
        }
        for (name, m) in &self.matrices {
            if m.iter().flatten().flatten().any(|v| !v.is_finite()) {
                return bad(name.clone());
            }
        }
        Ok(())
    }
}

/// Twelve significant digits in scientific notation.
pub fn format_value(x: f64) -> String {
    format!("{x:.11e}")
}

/// Sweep reports give the sweep table; every other report gives one row of
/// its scalars, columns sorted by name. Wall time is never part of the body.
pub fn emit_csv(report: &ExperimentReport) -> String {
    let mut out = String::new();
    let mut line = |cells: Vec<String>| {
        out.push_str(&cells.join(","));
        out.push('\n');
    };
    if report.experiment == Experiment::Sweep {
        line(SWEEP_COLUMNS.iter().map(|s| s.to_string()).collect());
        for row in &report.rows {
            line(row.values().iter().copied().map(format_value).collect());
        }
    } else {
        line(report.scalars.keys().cloned().collect());
        if !report.scalars.is_empty() {
            line(report.scalars.values().copied().map(format_value).collect());
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl CsvTable {
    /// The table `emit_csv` would write, before formatting.
    pub fn of_report(report: &ExperimentReport) -> Self {
        if report.experiment == Experiment::Sweep {
            Self {
                header: SWEEP_COLUMNS.iter().map(|s| s.to_string()).collect(),
                rows: report.rows.iter().map(|r| r.values().to_vec()).collect(),
            }
        } else {
            Self {
                header: report.scalars.keys().cloned().collect(),
                rows: if report.scalars.is_empty() {
                    Vec::new()
                } else {
                    vec![report.scalars.values().copied().collect()]
                },
            }
        }
    }

    pub fn sweep_rows(&self) -> Result<Vec<SweepRow>> {
        if self.header != SWEEP_COLUMNS {
            return Err(Error::Config(format!("not a sweep table: {:?}", self.header)));
        }
        self.rows.iter().map(|r| SweepRow::from_values(r)).collect()
    }
}

pub fn parse_csv(text: &str) -> Result<CsvTable> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(text.as_bytes());
    let csv_err = |e: csv::Error| Error::Config(format!("csv: {e}"));
    let header: Vec<String> = reader
        .headers()
        .map_err(csv_err)?
        .iter()
        .filter(|h| !h.is_empty())
        .map(str::to_owned)
        .collect();
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(csv_err)?;
        let row = record
            .iter()
            .map(|cell| {
                cell.parse::<f64>()
                    .map_err(|e| Error::Config(format!("csv cell `{cell}`: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Ok(CsvTable { header, rows })
}
