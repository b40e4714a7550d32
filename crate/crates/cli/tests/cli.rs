use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures").join(name)
}

fn spsys(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spsys"))
        .args(args)
        .env("SPSYS_NO_COLOR", "1")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", stdout(o)))
}

fn schema_check(doc: &Value) {
    let schema: Value =
        serde_json::from_str(include_str!("../schema/report.schema.json")).expect("schema is JSON");
    let validator = jsonschema::validator_for(&schema).expect("schema compiles");
    let errors: Vec<String> = validator.iter_errors(doc).map(|e| format!("{} at {}", e, e.instance_path)).collect();
    assert!(errors.is_empty(), "{errors:#?}\n{doc:#}");
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn eval_final_iteration() {
    let o = spsys(&["eval", path(&fixture("incare_final.spsys"))]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.contains("IIF = 6/6 (= 1.00)"));
    assert!(out.contains("DTC = 2/3 (= 0.67)"));
}

#[test]
fn check_broken_model() {
    let o = spsys(&["check", path(&fixture("broken.spsys"))]);
    assert_eq!(o.status.code(), Some(1));
    let e004: Vec<_> = stderr(&o).lines().filter(|l| l.contains("E004")).map(String::from).collect();
    assert_eq!(e004.len(), 1, "{}", stderr(&o));
}

#[test]
fn check_final_reports_smart_home_only() {
    let o = spsys(&["check", path(&fixture("incare_final.spsys"))]);
    assert_eq!(o.status.code(), Some(0));
    let lines: Vec<_> = stderr(&o).lines().map(String::from).collect();
    assert_eq!(lines.len(), 1);
    assert!(lines[0].starts_with("warning W101 [SmartHomePhy]"));
}

#[test]
fn setups_rows() {
    let o = spsys(&["setups", path(&fixture("incare_final.spsys"))]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).lines().count(), 6);
    let f = spsys(&["setups", "--functional", path(&fixture("incare_final.spsys"))]);
    assert_eq!(stdout(&f), "functional configurations: 2 (2^1)\n");
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.spsys");
    std::fs::write(&bad, "model \"x\" { requirements { req A : bogus; } structure {} }").unwrap();
    assert_eq!(spsys(&["check", bad.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(spsys(&["check", "/nonexistent/model.spsys"]).status.code(), Some(3));
    assert_eq!(spsys(&["check"]).status.code(), Some(3));
    assert_eq!(spsys(&["frobnicate"]).status.code(), Some(3));
    assert_eq!(spsys(&["--format", "xml", "check", "x"]).status.code(), Some(3));
    assert_eq!(spsys(&["--help"]).status.code(), Some(0));
    assert_eq!(spsys(&["--version"]).status.code(), Some(0));
    let final_model = fixture("incare_final.spsys");
    assert_eq!(spsys(&["--strict", "check", path(&final_model)]).status.code(), Some(4));
    assert_eq!(spsys(&["trace", path(&final_model), "--element", "Nowhere"]).status.code(), Some(3));
}

#[test]
fn strict_mode_fails_on_undefined_factors() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.spsys");
    std::fs::write(&empty, "model \"empty\" { requirements {} structure {} }").unwrap();
    let lax = spsys(&["eval", empty.to_str().unwrap()]);
    assert_eq!(lax.status.code(), Some(0));
    assert!(stdout(&lax).contains("IIF = n/a"));
    assert_eq!(spsys(&["--strict", "eval", empty.to_str().unwrap()]).status.code(), Some(4));
    assert_eq!(spsys(&["--strict", "check", empty.to_str().unwrap()]).status.code(), Some(0));
}

#[test]
fn every_subcommand_emits_one_schema_valid_document() {
    let dir = tempfile::tempdir().unwrap();
    let edits = dir.path().join("edits.txt");
    std::fs::write(&edits, "merge_cont FallDetectorSim.Cont FallDetectorPhy.Cont FallDetectorCont\n").unwrap();
    let bad = dir.path().join("bad.spsys");
    std::fs::write(&bad, "model \"x\" { structure { agent A : physical { uses Ghost; } } }").unwrap();
    let out = dir.path().join("scaffold.spsys");
    let early = fixture("incare_early.spsys");
    let runs: Vec<Vec<String>> = vec![
        vec!["check".into(), path(&early).into()],
        vec!["check".into(), path(&fixture("broken.spsys")).into()],
        vec!["check".into(), bad.to_str().unwrap().into()],
        vec!["check".into(), "/nonexistent.spsys".into()],
        vec!["eval".into(), path(&early).into()],
        vec!["setups".into(), path(&early).into()],
        vec!["setups".into(), "--functional".into(), path(&early).into()],
        vec!["trace".into(), path(&fixture("incare_final.spsys")).into(), "--element".into(), "TiagoPhy".into()],
        vec![
            "scaffold".into(),
            path(&fixture("incare_requirements.spsys")).into(),
            "-o".into(),
            out.to_str().unwrap().into(),
        ],
        vec!["whatif".into(), path(&early).into(), "--edits".into(), edits.to_str().unwrap().into()],
        vec!["report".into(), path(&early).into()],
    ];
    for args in runs {
        let mut full = vec!["--format", "json"];
        full.extend(args.iter().map(String::as_str));
        let o = spsys(&full);
        let doc = json(&o);
        schema_check(&doc);
        assert_eq!(doc["command"], args[0].as_str());
    }
}

#[test]
fn output_is_deterministic() {
    let file = fixture("incare_early.spsys");
    for format in ["text", "json"] {
        let args = ["--format", format, "report", path(&file)];
        assert_eq!(spsys(&args).stdout, spsys(&args).stdout);
    }
}

#[test]
fn report_combines_individual_payloads() {
    let file = fixture("incare_early.spsys");
    let report = json(&spsys(&["--format", "json", "report", path(&file)]));
    let parts = [
        ("check", vec!["check"]),
        ("factors", vec!["eval"]),
        ("setups", vec!["setups"]),
        ("functionalConfigurations", vec!["setups", "--functional"]),
    ];
    for (key, cmd) in parts {
        let mut args = vec!["--format", "json"];
        args.extend(cmd);
        args.push(path(&file));
        let single = json(&spsys(&args));
        assert_eq!(single[key], report[key], "{key}");
        assert_eq!(single["inputDigest"], report["inputDigest"]);
        assert_eq!(single["diagnostics"], report["diagnostics"]);
    }
    assert!(report["findings"].as_array().is_some_and(|f| !f.is_empty()));
}

#[test]
fn report_writes_into_directory() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("out");
    let o = spsys(&["report", path(&fixture("incare_final.spsys")), "-o", target.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(std::fs::read_to_string(target.join("report.txt")).unwrap(), stdout(&o));
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(target.join("report.json")).unwrap()).unwrap();
    schema_check(&doc);
}

#[test]
fn scaffold_output_checks_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("gen.spsys");
    let o = spsys(&["scaffold", path(&fixture("incare_requirements.spsys")), "-o", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("Robot_DTgrp <- Robot"));
    let check = json(&spsys(&["--format", "json", "check", out.to_str().unwrap()]));
    assert_eq!(check["check"]["errors"], 0);
}

#[test]
fn whatif_replays_merge() {
    let dir = tempfile::tempdir().unwrap();
    let edits = dir.path().join("edits.txt");
    std::fs::write(&edits, "# merge the fall detector controllers\nmerge_cont FallDetectorSim.Cont FallDetectorPhy.Cont FallDetectorCont\n").unwrap();
    let o = spsys(&["whatif", path(&fixture("incare_early.spsys")), "--edits", edits.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("IIF: 5/7 (= 0.71) -> 6/6 (= 1.00)"));
    std::fs::write(&edits, "explode Everything\n").unwrap();
    let o = spsys(&["whatif", path(&fixture("incare_early.spsys")), "--edits", edits.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    std::fs::write(&edits, "make_hybrid Nobody\n").unwrap();
    let o = spsys(&["whatif", path(&fixture("incare_early.spsys")), "--edits", edits.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn parse_errors_carry_spans() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.spsys");
    std::fs::write(&bad, "model \"x\" {\n  requirements {}\n  structure {\n    agent A : physical { uses Ghost; }\n  }\n}\n").unwrap();
    let o = spsys(&["--format", "json", "check", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let doc = json(&o);
    assert_eq!(doc["status"], "parse-error");
    assert_eq!(doc["diagnostics"][0]["code"], "P100");
    assert_eq!(doc["diagnostics"][0]["span"]["startLine"], 4);
    assert!(stderr(&o).contains("P100"));
}

#[test]
fn no_color_output_is_plain() {
    let o = Command::new(env!("CARGO_BIN_EXE_spsys"))
        .args(["--no-color", "check", path(&fixture("incare_early.spsys"))])
        .output()
        .unwrap();
    assert!(!stderr(&o).contains('\x1b'));
}
