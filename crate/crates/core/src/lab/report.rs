//! Experiment reports: per-instance numeric rows, exact-identity check
//! lines, fitted constants, and a verdict, emitted as CSV plus a JSON
//! mirror. Identical configs produce byte-identical files.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lab::config::ExperimentConfig;

/// Aggregate outcome of a suite.
///
/// `Fail` marks a violated exact identity; `Warn` marks fitted-constant
/// drift beyond the factor-2 stability contract with all exact checks
/// green.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Warn,
    Fail,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Pass => "PASS",
            Verdict::Warn => "WARN",
            Verdict::Fail => "FAIL",
        }
    }
}

/// One per-instance row of numeric columns plus a witness hash (empty
/// when the instance produced no norm witness).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub instance: usize,
    pub values: Vec<f64>,
    pub witness_hash: String,
}

/// Outcome of one named check. Hard checks are exact identities or
/// inequalities with stated tolerances; soft checks are the
/// fitted-constant stability contracts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub hard: bool,
    pub detail: String,
}

/// A named fitted constant or aggregate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedValue {
    pub name: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub suite: String,
    pub environment: String,
    pub config: ExperimentConfig,
    pub columns: Vec<String>,
    pub rows: Vec<Row>,
    pub fitted: Vec<NamedValue>,
    pub checks: Vec<Check>,
    pub notes: Vec<String>,
    pub verdict: Verdict,
}

impl ExperimentReport {
    /// Fail beats Warn beats Pass; soft-check failures never escalate
    /// past Warn.
    pub fn derive_verdict(checks: &[Check]) -> Verdict {
        if checks.iter().any(|c| c.hard && !c.passed) {
            Verdict::Fail
        } else if checks.iter().any(|c| !c.passed) {
            Verdict::Warn
        } else {
            Verdict::Pass
        }
    }
}

/// 17-significant-digit decimal rendering used in CSV columns; this is
/// enough to reproduce the f64 bit pattern on parse.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// Renders the per-instance rows as CSV: header, then one line per row,
/// LF endings, no quoting (column names and hashes contain no commas).
pub fn render_csv(report: &ExperimentReport) -> String {
    let mut out = String::new();
    out.push_str("instance");
    for c in &report.columns {
        out.push(',');
        out.push_str(c);
    }
    out.push_str(",witness_hash\n");
    for row in &report.rows {
        out.push_str(&row.instance.to_string());
        for v in &row.values {
            out.push(',');
            out.push_str(&format_float(*v));
        }
        out.push(',');
        out.push_str(&row.witness_hash);
        out.push('\n');
    }
    out
}

/// Writes `<suite>.csv` and `<suite>.json` into `dir`, returning both
/// paths.
pub fn write_report(report: &ExperimentReport, dir: &Path) -> Result<(PathBuf, PathBuf)> {
    std::fs::create_dir_all(dir)?;
    for row in &report.rows {
        if row.values.len() != report.columns.len() {
            return Err(Error::InvalidParam(format!(
                "report row {} has {} values for {} columns",
                row.instance,
                row.values.len(),
                report.columns.len()
            )));
        }
    }
    let csv_path = dir.join(format!("{}.csv", report.suite));
    let json_path = dir.join(format!("{}.json", report.suite));

    let mut csv = std::fs::File::create(&csv_path)?;
    csv.write_all(render_csv(report).as_bytes())?;

    let mut json = std::fs::File::create(&json_path)?;
    let body = serde_json::to_vec_pretty(report)?;
    json.write_all(&body)?;
    json.write_all(b"\n")?;
    Ok((csv_path, json_path))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_report() -> ExperimentReport {
        let checks = vec![
            Check {
                name: "identity".into(),
                passed: true,
                hard: true,
                detail: "residual 1.2e-12".into(),
            },
            Check {
                name: "fitted_drift".into(),
                passed: true,
                hard: false,
                detail: "ratio 1.07".into(),
            },
        ];
        ExperimentReport {
            suite: "averaging".into(),
            environment: "mwlab test".into(),
            config: ExperimentConfig::default(),
            columns: vec!["operator_norm".into(), "reducing_product".into()],
            rows: vec![
                Row {
                    instance: 0,
                    values: vec![1.25, 1.25],
                    witness_hash: "abc123".into(),
                },
                Row {
                    instance: 1,
                    values: vec![0.5, 0.5 + 1e-12],
                    witness_hash: "def456".into(),
                },
            ],
            fitted: vec![NamedValue {
                name: "fitted".into(),
                value: 1.0,
            }],
            verdict: ExperimentReport::derive_verdict(&checks),
            checks,
            notes: vec![],
        }
    }

    #[test]
    fn verdict_precedence() {
        let hard_fail = Check {
            name: "x".into(),
            passed: false,
            hard: true,
            detail: String::new(),
        };
        let soft_fail = Check {
            name: "y".into(),
            passed: false,
            hard: false,
            detail: String::new(),
        };
        let ok = Check {
            name: "z".into(),
            passed: true,
            hard: true,
            detail: String::new(),
        };
        assert_eq!(ExperimentReport::derive_verdict(&[ok.clone()]), Verdict::Pass);
        assert_eq!(
            ExperimentReport::derive_verdict(&[ok.clone(), soft_fail.clone()]),
            Verdict::Warn
        );
        assert_eq!(
            ExperimentReport::derive_verdict(&[ok, soft_fail, hard_fail]),
            Verdict::Fail
        );
    }

    #[test]
    fn csv_is_deterministic_and_lf_terminated() {
        let report = sample_report();
        let a = render_csv(&report);
        let b = render_csv(&report);
        assert_eq!(a, b);
        assert!(!a.contains('\r'));
        assert!(a.starts_with("instance,operator_norm,reducing_product,witness_hash\n"));
        assert_eq!(a.lines().count(), 3);
    }

    #[test]
    fn float_format_round_trips_bits() {
        for v in [
            0.0,
            1.0,
            -1.0 / 3.0,
            6.02e23,
            f64::MIN_POSITIVE,
            1.2345678901234567e-5,
        ] {
            let parsed: f64 = format_float(v).parse().unwrap();
            assert_eq!(parsed.to_bits(), v.to_bits());
        }
    }

    #[test]
    fn files_are_byte_identical_and_json_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let report = sample_report();
        let (csv1, json1) = write_report(&report, dir.path()).unwrap();
        let bytes_csv1 = std::fs::read(&csv1).unwrap();
        let bytes_json1 = std::fs::read(&json1).unwrap();
        let (csv2, json2) = write_report(&report, dir.path()).unwrap();
        assert_eq!(bytes_csv1, std::fs::read(&csv2).unwrap());
        assert_eq!(bytes_json1, std::fs::read(&json2).unwrap());

        let parsed: ExperimentReport =
            serde_json::from_slice(&bytes_json1).unwrap();
        assert_eq!(parsed, report);
    }

    #[test]
    fn header_only_csv_for_empty_suite() {
        let mut report = sample_report();
        report.rows.clear();
        let csv = render_csv(&report);
        assert_eq!(csv, "instance,operator_norm,reducing_product,witness_hash\n");
    }
}
