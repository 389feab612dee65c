//! The JSON produced for the page, checked natively.

use serde_json::Value;

fn parse(s: String) -> Value {
    serde_json::from_str(&s).unwrap()
}

#[test]
fn describe_lists_every_state() {
    let view = parse(clmdp_demo::describe("taxi", 10).unwrap());
    let states = view["states"].as_array().unwrap();
    assert!(!states.is_empty());
    assert_eq!(view["contexts"].as_array().unwrap().len(), 3);
    assert_eq!(view["actions"].as_array().unwrap().len(), 5);
    assert!(view["pickup"].is_array());
    let width = view["width"].as_u64().unwrap();
    assert!(states.iter().all(|s| s["x"].as_u64().unwrap() < width));
}

#[test]
fn resolver_clears_the_stitched_conflicts() {
    let b6 = parse(clmdp_demo::plan("salp", 8, "B6").unwrap());
    assert!(!b6["conflict_states"].as_array().unwrap().is_empty());
    assert!(b6["resolved"].is_null());

    let o1 = parse(clmdp_demo::plan("salp", 8, "o1").unwrap());
    assert!(o1["conflict_states"].as_array().unwrap().is_empty());
    assert_eq!(o1["resolved"], true);
    assert_eq!(o1["actions"].as_array().unwrap().len(), b6["actions"].as_array().unwrap().len());
}

#[test]
fn inference_beats_the_constant_mapping() {
    let r = parse(clmdp_demo::infer("warehouse", 3, 10, 1).unwrap());
    assert!(r["accuracy"].as_f64().unwrap() > r["constant_accuracy"].as_f64().unwrap());
    assert!(r["plan"]["conflict_states"].as_array().unwrap().is_empty());
    assert!(r["visited"].as_array().unwrap().iter().any(|v| v == true));
}

#[test]
fn bad_inputs_are_errors() {
    assert_eq!(clmdp_demo::describe("ocean", 1).unwrap_err().kind(), "invalid-argument");
    assert_eq!(clmdp_demo::plan("salp", 3, "B5").unwrap_err().kind(), "not-implemented");
    assert_eq!(clmdp_demo::plan("salp", 3, "O2").unwrap_err().kind(), "invalid-argument");
}
