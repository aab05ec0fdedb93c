//! Comparison tables: every model's per-scenario aggregates plus percentage
//! change against a baseline model on the same scenario.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::eval::EvaluationReport;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub model: String,
    pub scenario: String,
    pub trials: usize,
    pub mean_return: f64,
    pub mttf: f64,
    pub mean_distance: f64,
    pub mean_ci: f64,
    pub return_change_pct: Option<f64>,
    pub mttf_change_pct: Option<f64>,
    pub distance_change_pct: Option<f64>,
    pub ci_change_pct: Option<f64>,
    pub success_25: f64,
    pub success_50: f64,
    pub success_75: f64,
    pub success_95: f64,
    pub collision_rate: f64,
    pub hit_rate: Option<f64>,
}

/// `100 * (value - base) / |base|`; undefined for a zero base unless the
/// value is zero too.
pub fn pct_change(base: f64, value: f64) -> Option<f64> {
    if base == 0.0 {
        (value == 0.0).then_some(0.0)
    } else {
        Some(100.0 * (value - base) / base.abs())
    }
}

/// One row per report, in input order. Change columns are empty when the
/// baseline model has no report for that scenario.
pub fn report_rows(reports: &[EvaluationReport], baseline_model: &str) -> Vec<ReportRow> {
    reports
        .iter()
        .map(|r| {
            let base = reports.iter().find(|b| b.model == baseline_model && b.scenario == r.scenario);
            let change = |f: fn(&EvaluationReport) -> f64| base.and_then(|b| pct_change(f(b), f(r)));
            ReportRow {
                model: r.model.clone(),
                scenario: r.scenario.clone(),
                trials: r.trials,
                mean_return: r.mean_return,
                mttf: r.mttf,
                mean_distance: r.mean_distance,
                mean_ci: r.mean_ci,
                return_change_pct: change(|x| x.mean_return),
                mttf_change_pct: change(|x| x.mttf),
                distance_change_pct: change(|x| x.mean_distance),
                ci_change_pct: change(|x| x.mean_ci),
                success_25: r.success_25,
                success_50: r.success_50,
                success_75: r.success_75,
                success_95: r.success_95,
                collision_rate: r.collision_rate,
                hit_rate: r.hit_rate,
            }
        })
        .collect()
}

pub fn emit_report(reports: &[EvaluationReport], baseline_model: &str, format: ReportFormat, path: &Path) -> Result<()> {
    let rows = report_rows(reports, baseline_model);
    match format {
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_path(path)?;
            for row in &rows {
                w.serialize(row)?;
            }
            w.flush().map_err(|e| Error::io(path, e))
        }
        ReportFormat::Json => {
            let text = serde_json::to_string_pretty(&rows)?;
            std::fs::write(path, text).map_err(|e| Error::io(path, e))
        }
    }
}
