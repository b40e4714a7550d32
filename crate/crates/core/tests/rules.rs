use spsys_core::testing::rule_cases;
use spsys_core::{diagnose, parse, validate, Model, Severity};

fn model(source: &str) -> Model {
    let out = parse(source, "rule.spsys");
    out.model.unwrap_or_else(|| panic!("{source}\n{:#?}", out.diagnostics))
}

#[test]
fn every_rule_has_a_trigger_and_a_clean_fixture() {
    for case in rule_cases() {
        let hits: Vec<_> = diagnose(&model(&case.trigger)).into_iter().filter(|d| d.code == case.code).collect();
        assert!(
            hits.iter().any(|d| d.subject.as_str() == case.subject),
            "{} not raised on {}: {hits:?}",
            case.code,
            case.subject
        );
        let expected = if case.code.starts_with('E') { Severity::Error } else { Severity::Warning };
        assert!(hits.iter().all(|d| d.severity == expected));
        let clean = diagnose(&model(&case.clean));
        assert!(clean.iter().all(|d| d.code != case.code), "{} raised on clean fixture: {clean:?}", case.code);
    }
}

#[test]
fn catalog_is_complete() {
    let codes: Vec<_> = rule_cases().into_iter().map(|c| c.code).collect();
    let mut expected: Vec<String> = (1..=11).map(|n| format!("E{n:03}")).collect();
    expected.extend((101..=105).map(|n| format!("W{n}")));
    assert_eq!(codes, expected);
}

#[test]
fn errors_fail_validation_and_warnings_do_not() {
    for case in rule_cases() {
        let result = validate(&model(&case.trigger));
        assert_eq!(result.is_err(), case.code.starts_with('E'), "{}", case.code);
    }
}

#[test]
fn diagnostics_are_deterministic_and_idempotent() {
    for case in rule_cases() {
        let m = model(&case.trigger);
        assert_eq!(diagnose(&m), diagnose(&m));
        let copy = m.clone();
        let _ = validate(&m);
        assert_eq!(m, copy);
        if let Ok(v) = validate(&m) {
            assert_eq!(diagnose(v.model()), diagnose(&m));
        }
    }
}

#[test]
fn broken_fixture_fails_with_e004() {
    let path = format!("{}/fixtures/broken.spsys", env!("CARGO_MANIFEST_DIR"));
    let out = parse(&std::fs::read_to_string(path).unwrap(), "broken.spsys");
    let failure = validate(&out.model.unwrap()).unwrap_err();
    assert!(failure.diagnostics.iter().any(|d| d.code == "E004"));
}
