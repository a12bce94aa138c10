//! The `derive` binary end to end on the shipped fixtures.

use std::path::PathBuf;
use std::process::Command;

use serde_json::Value;

fn fixture(name: &str) -> String {
    let p: PathBuf = [env!("CARGO_MANIFEST_DIR"), "..", "..", "fixtures", name].iter().collect();
    p.to_string_lossy().into_owned()
}

fn derive(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_derive")).args(args).output().unwrap();
    (out.status.code().unwrap(), String::from_utf8(out.stdout).unwrap())
}

fn json(args: &[&str]) -> (i32, Value) {
    let (code, text) = derive(args);
    (code, serde_json::from_str(&text).unwrap_or_else(|e| panic!("{e}: {text}")))
}

#[test]
fn toy_checks_clean() {
    let (code, v) = json(&["check", &fixture("toy.json")]);
    assert_eq!(code, 0);
    assert_eq!(v["pass"], true);
    assert_eq!(v["schema"], "derive-report/1");
}

#[test]
fn broken_toy_reports_its_witness() {
    let (code, v) = json(&["check", &fixture("toy_broken.json")]);
    assert_eq!(code, 1);
    assert_eq!(v["payload"]["structure"]["witnesses"][0], "n=1, input e, residual w");
    let (code, text) = derive(&["check", &fixture("toy_broken.json"), "--report", "text"]);
    assert_eq!(code, 1);
    assert!(text.contains("  n=1, input e, residual w\n"), "{text}");
}

#[test]
fn quasi_smooth_vdim_is_zero() {
    let (code, v) = json(&["vdim", &fixture("quasi_smooth.json")]);
    assert_eq!(code, 0);
    assert_eq!(v["payload"]["vdim"], 0);
}

#[test]
fn input_errors_exit_two() {
    assert_eq!(derive(&["check", "/nonexistent.json"]).0, 2);
    assert_eq!(derive(&["frobnicate"]).0, 2);
    let dir = std::env::temp_dir().join(format!("derive-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let bad = dir.join("bad.json");
    std::fs::write(&bad, r#"{"coordinates": [], "bundle": {"1": ["e"]}, "operations": [{"inputs": ["e"], "output": {"q": "1"}}]}"#).unwrap();
    let (code, v) = json(&["check", bad.to_str().unwrap()]);
    assert_eq!(code, 2);
    assert!(v["payload"]["error"].as_str().unwrap().contains("operations[0]"), "{v}");
}

#[test]
fn reports_are_byte_stable_and_timing_is_opt_in() {
    let args = ["transfer", &fixture("toy.json"), &fixture("toy_contraction.json")];
    let (code, first) = derive(&args);
    assert_eq!(code, 0);
    assert_eq!(derive(&args).1, first);
    assert!(!first.contains("timing_ms"));
    let mut timed = args.to_vec();
    timed.push("--timing");
    assert!(derive(&timed).1.contains("timing_ms"));
}

#[test]
fn transfer_of_toy_matches_oracle() {
    let (code, v) = json(&["transfer", &fixture("toy.json"), &fixture("toy_contraction.json")]);
    assert_eq!(code, 0);
    assert_eq!(v["payload"]["oracle_agrees"], true);
    assert_eq!(v["payload"]["retract"]["bundle"]["2"], serde_json::json!(["h"]));
}

#[test]
fn geometry_commands_pass_on_fixtures() {
    for args in [
        vec!["tangent", "quasi_smooth.json"],
        vec!["pathspace", "line.json", "--degree-cap", "4"],
        vec!["factorize", "amplitude_two.json"],
        vec!["factorize", "quasi_smooth.json"],
        vec!["invert", "tangent_flat.json", "tangent_bent.json", "connection_change.json"],
        vec!["strictify", "fibration_source.json", "fibration_target.json", "fibration.json"],
        vec!["reduce", "fibration_source.json", "fibration_target.json", "fibration.json"],
        vec!["pullback", "fibration_source.json", "fibration_target.json", "fibration.json", "fibration_target.json", "fibration_target_identity.json"],
        vec!["cdga", "toy.json"],
    ] {
        let full: Vec<String> = args.iter().map(|a| if a.ends_with(".json") { fixture(a) } else { a.to_string() }).collect();
        let refs: Vec<&str> = full.iter().map(String::as_str).collect();
        let (code, v) = json(&refs);
        assert_eq!(code, 0, "{args:?}: {v}");
    }
}

#[test]
fn intersections_report_cohomology() {
    let (code, v) = json(&["intersect", &fixture("line_x_axis.json"), &fixture("parabola.json"), "--points", &fixture("origin_2d.json")]);
    assert_eq!(code, 0);
    assert_eq!(v["payload"]["vdim"], 0);
    assert_eq!(v["payload"]["points"][0]["cohomology"], serde_json::json!([1, 1]));
    let (_, v) = json(&["intersect", &fixture("line_x_axis.json"), &fixture("line_diagonal.json"), "--points", &fixture("origin_2d.json")]);
    assert_eq!(v["payload"]["points"][0]["cohomology"], serde_json::json!([0, 0]));
    let (_, v) = json(&["intersect", &fixture("point_on_line.json"), &fixture("point_on_line.json"), "--points", &fixture("half.json")]);
    assert_eq!(v["payload"]["vdim"], -1);
    assert_eq!(v["payload"]["points"][0]["cohomology"], serde_json::json!([0, 1]));
}

#[test]
fn cdga_of_broken_toy_fails_consistently() {
    let (code, v) = json(&["cdga", &fixture("toy_broken.json")]);
    assert_eq!(code, 1);
    assert_eq!(v["payload"]["biconditional"], true);
    assert_eq!(v["payload"]["q_squared_zero"], false);
}
