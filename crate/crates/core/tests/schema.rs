use std::path::Path;

use clap::Parser;
use derive_core::cli::{run, Cli};
use serde_json::Value;

fn schema() -> jsonschema::JSONSchema {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../docs/derive.schema.json");
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    jsonschema::JSONSchema::compile(&doc).expect("schema compiles")
}

fn errors(s: &jsonschema::JSONSchema, v: &Value) -> Vec<String> {
    match s.validate(v) {
        Ok(()) => vec![],
        Err(es) => es.map(|e| format!("{} at {}", e, e.instance_path)).collect(),
    }
}

#[test]
fn every_fixture_validates() {
    let s = schema();
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures");
    let mut seen = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let v: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
        let errs = errors(&s, &v);
        assert!(errs.is_empty(), "{}: {errs:?}", path.display());
        seen += 1;
    }
    assert!(seen >= 20);
}

#[test]
fn reports_validate() {
    let s = schema();
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures");
    let toy = dir.join("toy.json");
    for args in [
        vec!["derive", "check", toy.to_str().unwrap()],
        vec!["derive", "--timing", "vdim", toy.to_str().unwrap()],
        vec!["derive", "check", "no/such/file.json"],
    ] {
        let cli = Cli::try_parse_from(&args).unwrap();
        let (report, _) = run(&cli);
        let v: Value = serde_json::from_str(&report.to_json()).unwrap();
        let errs = errors(&s, &v);
        assert!(errs.is_empty(), "{args:?}: {errs:?}");
    }
}

#[test]
fn malformed_documents_are_rejected() {
    let s = schema();
    for bad in [
        r#"{"coordinates": ["x"], "bundle": {"one": ["a"]}}"#,
        r#"{"coordinates": [], "bundle": {}, "extra": 1}"#,
        r#"{"eta": [], "filtration": "sideways"}"#,
        r#"{"base_map": [], "components": [{"inputs": ["a"]}]}"#,
        r#"[["1/2", "x"]]"#,
    ] {
        let v: Value = serde_json::from_str(bad).unwrap();
        assert!(!errors(&s, &v).is_empty(), "{bad} validated");
    }
}
