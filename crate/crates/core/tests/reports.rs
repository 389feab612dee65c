//! End-to-end experiment runs and the files they produce.

use clmdp::domains::{DomainConfig, DomainKind};
use clmdp::experiment::{run_experiment, ExperimentConfig};
use clmdp::report::{emit_report, results_csv, ReportFormat, REPORT_SCHEMA};
use clmdp::Technique;

fn small_config(domain: DomainKind) -> ExperimentConfig {
    ExperimentConfig {
        domain: Some(DomainConfig::new(domain, 0)),
        techniques: Technique::IMPLEMENTED.to_vec(),
        trials: 10,
        instance_seeds: Some(vec![3, 8]),
        ..ExperimentConfig::default()
    }
}

#[test]
fn report_json_matches_its_schema() {
    let report = run_experiment(&small_config(DomainKind::Salp)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let written = emit_report(&report, dir.path(), &[ReportFormat::Json, ReportFormat::Csv]).unwrap();
    assert_eq!(written.len(), 4);

    let schema: serde_json::Value = serde_json::from_str(REPORT_SCHEMA).unwrap();
    let validator = jsonschema::validator_for(&schema).unwrap();
    let text = std::fs::read_to_string(dir.path().join("report.json")).unwrap();
    let instance: serde_json::Value = serde_json::from_str(&text).unwrap();
    let errors: Vec<String> = validator.iter_errors(&instance).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "{errors:?}");
}

#[test]
fn schema_rejects_out_of_range_percentages() {
    let report = run_experiment(&ExperimentConfig {
        techniques: vec![Technique::O1],
        trials: 2,
        instance_seeds: Some(vec![3]),
        ..small_config(DomainKind::Salp)
    })
    .unwrap();
    let mut instance = serde_json::to_value(&report).unwrap();
    instance["results"][0]["percent_conflicts"] = serde_json::json!(150.0);
    let schema: serde_json::Value = serde_json::from_str(REPORT_SCHEMA).unwrap();
    assert!(!jsonschema::validator_for(&schema).unwrap().is_valid(&instance));
}

#[test]
fn identical_configs_give_identical_csv() {
    for domain in DomainKind::ALL {
        let config = small_config(domain);
        let a = results_csv(&run_experiment(&config).unwrap()).unwrap();
        let b = results_csv(&run_experiment(&config).unwrap()).unwrap();
        assert_eq!(a, b, "{domain}");
    }
}

#[test]
fn csv_has_one_row_per_technique_and_instance() {
    let report = run_experiment(&small_config(DomainKind::Warehouse)).unwrap();
    let csv = results_csv(&report).unwrap();
    let mut reader = csv::Reader::from_reader(csv.as_bytes());
    let header = reader.headers().unwrap().clone();
    assert!(header.iter().any(|h| h == "normalized_o3"));
    assert_eq!(reader.records().count(), 7 * 2);
}

#[test]
fn o1_is_conflict_free_where_the_stitched_policy_is_not() {
    let report = run_experiment(&small_config(DomainKind::Salp)).unwrap();
    for r in report.results_for(Technique::O1) {
        assert!(!r.static_conflict);
        assert_eq!(r.percent_conflicts, 0.0);
        assert_eq!(r.percent_goal_reached, 100.0);
        assert_eq!(r.resolved, Some(true));
    }
    assert!(report.results_for(Technique::B6).any(|r| r.static_conflict));
}

#[test]
fn o2_reports_mapping_accuracy() {
    let report = run_experiment(&small_config(DomainKind::Taxi)).unwrap();
    for r in report.results_for(Technique::O2) {
        let acc = r.z_accuracy.unwrap();
        assert!((0.0..=1.0).contains(&acc));
    }
    assert!(report.results_for(Technique::O1).all(|r| r.z_accuracy.is_none()));
}

#[test]
fn reserved_technique_is_refused() {
    let err = run_experiment(&ExperimentConfig {
        techniques: vec![Technique::B5],
        ..small_config(DomainKind::Salp)
    })
    .unwrap_err();
    assert_eq!(err.kind(), "not-implemented");
}
