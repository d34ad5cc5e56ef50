use std::io::Write;

use serde::{Deserialize, Serialize};

use super::config::{Method, RunConfig};
use crate::error::{Error, Result};
use crate::qpinn::StopReason;

pub const REPORT_FORMAT_VERSION: u32 = 1;

/// Written into every report file so readers know what `train_time_s` covers.
pub const TIMING_SCOPE: &str = "wall-clock seconds for the full training pipeline: reservoir construction, \
feature extraction and readout fit (qrc, esn) or the optimisation loop (qpinn); \
trajectory generation and test evaluation are excluded";

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feature_dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_grad_norm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_grad_norm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_loss: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_loss: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop_reason: Option<StopReason>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum SeedOutcome {
    Ok {
        train_mse: f64,
        test_mse: f64,
        diagnostics: Diagnostics,
    },
    Failed {
        error: String,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedReport {
    pub system: String,
    pub method: Method,
    pub seed: u64,
    pub train_time_s: f64,
    #[serde(flatten)]
    pub outcome: SeedOutcome,
}

impl SeedReport {
    pub fn is_ok(&self) -> bool {
        matches!(self.outcome, SeedOutcome::Ok { .. })
    }

    pub fn train_mse(&self) -> Option<f64> {
        match self.outcome {
            SeedOutcome::Ok { train_mse, .. } => Some(train_mse),
            SeedOutcome::Failed { .. } => None,
        }
    }

    pub fn test_mse(&self) -> Option<f64> {
        match self.outcome {
            SeedOutcome::Ok { test_mse, .. } => Some(test_mse),
            SeedOutcome::Failed { .. } => None,
        }
    }

    pub fn diagnostics(&self) -> Option<&Diagnostics> {
        match &self.outcome {
            SeedOutcome::Ok { diagnostics, .. } => Some(diagnostics),
            SeedOutcome::Failed { .. } => None,
        }
    }
}

/// Mean and sample standard deviation over the successful seeds of one
/// (system, method) group.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub system: String,
    pub method: Method,
    /// Successful seeds, in report order.
    pub seeds: Vec<u64>,
    pub failed_seeds: Vec<u64>,
    pub train_mse_mean: f64,
    pub train_mse_std: f64,
    pub test_mse_mean: f64,
    pub test_mse_std: f64,
    pub train_time_s: f64,
    /// Set when only one seed succeeded; the std fields are then 0.
    pub std_undefined: bool,
}

/// Returns `(mean, std)` with the `n − 1` denominator; std is 0 for one value.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    (mean, (ss / (n - 1.0)).sqrt())
}

pub fn aggregate(reports: &[SeedReport]) -> Result<AggregateReport> {
    let first = reports
        .first()
        .ok_or_else(|| Error::Aggregation("no reports to aggregate".into()))?;
    if let Some(r) = reports.iter().find(|r| r.system != first.system || r.method != first.method) {
        return Err(Error::Aggregation(format!(
            "mixed groups: {}/{} and {}/{}",
            first.system, first.method, r.system, r.method
        )));
    }
    let ok: Vec<&SeedReport> = reports.iter().filter(|r| r.is_ok()).collect();
    if ok.is_empty() {
        return Err(Error::Aggregation(format!(
            "all {} seeds of {}/{} failed",
            reports.len(),
            first.system,
            first.method
        )));
    }
    let train: Vec<f64> = ok.iter().filter_map(|r| r.train_mse()).collect();
    let test: Vec<f64> = ok.iter().filter_map(|r| r.test_mse()).collect();
    let time: Vec<f64> = ok.iter().map(|r| r.train_time_s).collect();
    let (train_mse_mean, train_mse_std) = mean_std(&train);
    let (test_mse_mean, test_mse_std) = mean_std(&test);
    Ok(AggregateReport {
        system: first.system.clone(),
        method: first.method,
        seeds: ok.iter().map(|r| r.seed).collect(),
        failed_seeds: reports.iter().filter(|r| !r.is_ok()).map(|r| r.seed).collect(),
        train_mse_mean,
        train_mse_std,
        test_mse_mean,
        test_mse_std,
        train_time_s: mean_std(&time).0,
        std_undefined: ok.len() == 1,
    })
}

pub const AGGREGATE_CSV_HEADER: &str =
    "system,method,seeds,train_mse_mean,train_mse_std,test_mse_mean,test_mse_std,train_time_s";

pub fn write_aggregate_csv<W: Write>(aggregates: &[AggregateReport], mut out: W) -> Result<()> {
    writeln!(out, "{AGGREGATE_CSV_HEADER}")?;
    for a in aggregates {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            a.system,
            a.method,
            a.seeds.len(),
            a.train_mse_mean,
            a.train_mse_std,
            a.test_mse_mean,
            a.test_mse_std,
            a.train_time_s
        )?;
    }
    Ok(())
}

/// Everything one `run_seeds` call produced, as stored on disk.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub format_version: u32,
    pub timing_scope: String,
    pub config: RunConfig,
    pub reports: Vec<SeedReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aggregate: Option<AggregateReport>,
}

impl RunReport {
    pub fn new(config: RunConfig, reports: Vec<SeedReport>) -> Self {
        let aggregate = aggregate(&reports).ok();
        Self {
            format_version: REPORT_FORMAT_VERSION,
            timing_scope: TIMING_SCOPE.to_string(),
            config,
            reports,
            aggregate,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        Ok(text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let report: Self = serde_json::from_str(text)?;
        if report.format_version != REPORT_FORMAT_VERSION {
            return Err(Error::FormatVersion(report.format_version));
        }
        Ok(report)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn ok_report(seed: u64, train: f64, test: f64, time: f64) -> SeedReport {
        SeedReport {
            system: "lorenz".into(),
            method: Method::Qrc,
            seed,
            train_time_s: time,
            outcome: SeedOutcome::Ok {
                train_mse: train,
                test_mse: test,
                diagnostics: Diagnostics {
                    feature_dim: Some(160),
                    ..Diagnostics::default()
                },
            },
        }
    }

    fn failed(seed: u64) -> SeedReport {
        SeedReport {
            system: "lorenz".into(),
            method: Method::Qrc,
            seed,
            train_time_s: 0.0,
            outcome: SeedOutcome::Failed { error: "boom".into() },
        }
    }

    #[test]
    fn two_values_hand_arithmetic() {
        let a = aggregate(&[ok_report(0, 1.0, 1.0, 1.0), ok_report(1, 3.0, 3.0, 3.0)]).unwrap();
        assert_eq!(a.train_mse_mean, 2.0);
        assert!((a.train_mse_std - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(a.train_time_s, 2.0);
        assert!(!a.std_undefined);
    }

    #[test]
    fn single_report_flags_std() {
        let a = aggregate(&[ok_report(0, 5.0, 2.0, 0.1)]).unwrap();
        assert_eq!(a.train_mse_std, 0.0);
        assert_eq!(a.test_mse_std, 0.0);
        assert!(a.std_undefined);
    }

    #[test]
    fn failed_seeds_excluded_and_counted() {
        let a = aggregate(&[ok_report(0, 1.0, 1.0, 1.0), failed(1), ok_report(2, 3.0, 3.0, 1.0)]).unwrap();
        assert_eq!(a.seeds, vec![0, 2]);
        assert_eq!(a.failed_seeds, vec![1]);
        assert_eq!(a.train_mse_mean, 2.0);
        assert!(matches!(aggregate(&[failed(0), failed(1)]), Err(Error::Aggregation(_))));
        assert!(matches!(aggregate(&[]), Err(Error::Aggregation(_))));
    }

    #[test]
    fn mixed_groups_rejected() {
        let mut other = ok_report(1, 1.0, 1.0, 1.0);
        other.method = Method::Esn;
        assert!(aggregate(&[ok_report(0, 1.0, 1.0, 1.0), other]).is_err());
    }

    #[test]
    fn csv_layout() {
        let a = aggregate(&[ok_report(0, 1.0, 1.0, 1.0), ok_report(1, 3.0, 3.0, 3.0)]).unwrap();
        let mut buf = Vec::new();
        write_aggregate_csv(&[a], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], AGGREGATE_CSV_HEADER);
        assert!(lines[1].starts_with("lorenz,qrc,2,2,1.414"));
    }

    #[test]
    fn json_round_trip_is_byte_identical() {
        let reports = vec![ok_report(0, 17.123456789012345, 3.1, 0.25), failed(1)];
        let run = RunReport::new(RunConfig::default(), reports);
        let text = run.to_json().unwrap();
        let back = RunReport::from_json(&text).unwrap();
        assert_eq!(back, run);
        assert_eq!(back.to_json().unwrap(), text);
    }
}
