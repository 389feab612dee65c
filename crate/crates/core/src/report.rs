//! Writing experiment reports to disk.
//!
//! `results.csv` holds one row per technique and instance, `report.json` the
//! whole report (see [`REPORT_SCHEMA`]). `heatmap.csv` (technique ×
//! objective mean normalised value) and `min_objective.csv` are written with
//! either format. Floats are written in shortest round-trip form and no
//! timings are included, so identical runs produce identical files.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiment::ExperimentReport;

/// JSON schema of `report.json`.
pub const REPORT_SCHEMA: &str = include_str!("../schemas/report.schema.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Csv,
    Json,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            _ => Err(Error::InvalidArgument(format!("unknown format `{s}`"))),
        }
    }
}

impl fmt::Display for ReportFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ReportFormat::Csv => "csv",
            ReportFormat::Json => "json",
        })
    }
}

/// Writes the report in each requested format and returns the written paths.
pub fn emit_report(
    report: &ExperimentReport,
    dir: &Path,
    formats: &[ReportFormat],
) -> Result<Vec<PathBuf>> {
    if report.techniques.is_empty() || report.results.is_empty() {
        return Err(Error::InvalidArgument("report has no techniques".into()));
    }
    if formats.is_empty() {
        return Err(Error::InvalidArgument("no output format".into()));
    }
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    if formats.contains(&ReportFormat::Csv) {
        let path = dir.join("results.csv");
        fs::write(&path, results_csv(report)?)?;
        written.push(path);
    }
    if formats.contains(&ReportFormat::Json) {
        let path = dir.join("report.json");
        fs::write(&path, serde_json::to_string_pretty(report)? + "\n")?;
        written.push(path);
    }
    let path = dir.join("heatmap.csv");
    fs::write(&path, heatmap_csv(report)?)?;
    written.push(path);
    let path = dir.join("min_objective.csv");
    fs::write(&path, min_objective_csv(report)?)?;
    written.push(path);
    Ok(written)
}

fn num(x: f64) -> String {
    x.to_string()
}

fn objective_columns(prefix: &str, n: usize) -> impl Iterator<Item = String> + '_ {
    (1..=n).map(move |k| format!("{prefix}o{k}"))
}

fn finish(writer: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = writer
        .into_inner()
        .map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// One row per technique and instance.
pub fn results_csv(report: &ExperimentReport) -> Result<String> {
    let n = report.num_objectives;
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = [
        "label",
        "instance",
        "seed",
        "technique",
        "trials",
        "static_conflict",
        "static_conflict_states",
        "resolved",
        "percent_conflicts",
        "percent_goal_reached",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    header.extend(objective_columns("return_", n));
    header.extend(objective_columns("discounted_return_", n));
    header.extend(objective_columns("normalized_", n));
    header.extend(["min_objective".to_string(), "z_accuracy".to_string()]);
    w.write_record(&header)?;
    for r in &report.results {
        let mut row = vec![
            report.label.clone(),
            r.instance.clone(),
            r.seed.to_string(),
            r.technique.to_string(),
            report.trials.to_string(),
            r.static_conflict.to_string(),
            r.static_conflict_states.to_string(),
            r.resolved.map(|b| b.to_string()).unwrap_or_default(),
            num(r.percent_conflicts),
            num(r.percent_goal_reached),
        ];
        row.extend(r.mean_returns.iter().copied().map(num));
        row.extend(r.mean_discounted_returns.iter().copied().map(num));
        row.extend(r.normalized.iter().copied().map(num));
        row.push(num(r.min_objective));
        row.push(r.z_accuracy.map(num).unwrap_or_default());
        w.write_record(&row)?;
    }
    finish(w)
}

/// Technique × objective mean normalised value.
pub fn heatmap_csv(report: &ExperimentReport) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["technique".to_string()];
    header.extend(objective_columns("", report.num_objectives));
    w.write_record(&header)?;
    for a in &report.aggregates {
        let mut row = vec![a.technique.to_string()];
        row.extend(a.normalized.iter().map(|s| num(s.mean)));
        w.write_record(&row)?;
    }
    finish(w)
}

/// Minimum over objectives of the mean normalised value, per technique.
pub fn min_objective_csv(report: &ExperimentReport) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["technique", "min_objective"])?;
    for a in &report.aggregates {
        w.write_record([a.technique.to_string(), num(a.min_objective)])?;
    }
    finish(w)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn empty_report() -> ExperimentReport {
        ExperimentReport {
            label: "x".into(),
            trials: 1,
            num_objectives: 1,
            techniques: vec![],
            instances: vec![],
            results: vec![],
            aggregates: vec![],
        }
    }

    #[test]
    fn empty_report_writes_nothing() {
        let dir = std::env::temp_dir().join(format!("clmdp-empty-report-{}", std::process::id()));
        let err = emit_report(&empty_report(), &dir, &[ReportFormat::Csv]).unwrap_err();
        assert_eq!(err.kind(), "invalid-argument");
        assert!(!dir.exists());
    }

    #[test]
    fn parses_formats() {
        assert_eq!("CSV".parse::<ReportFormat>().unwrap(), ReportFormat::Csv);
        assert!("xml".parse::<ReportFormat>().is_err());
    }
}
