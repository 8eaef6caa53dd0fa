use fuzzgate_core::analyzers::{parse_constraint_report, parse_feasibility_output, serialize_verdict};
use fuzzgate_core::executor::{parse_sanitizer_report, UNKNOWN_FUNCTION};
use fuzzgate_core::{ConstraintCategory, FeasibilityVerdict, SessionBundle};
use proptest::prelude::*;

#[path = "support/fuzz.rs"]
mod fuzz;
use fuzz::*;

#[test]
fn getroot_reference_verdict_parses() {
    let v = parse_feasibility_output(&fixture_text("text/getroot_verdict.txt")).unwrap();
    assert!(!v.feasible);
    assert!(v.analysis.starts_with("The crash is a heap-buffer-overflow read in `flexbuffers::GetRoot`"));
    assert!(v.analysis.contains("at least 3 bytes long"));
    assert_eq!(v.source_code_evidence, "...");
    assert_eq!(v.recommendations, "...");
}

#[test]
fn scripted_verdicts_parse() {
    let dir = format!("{FIXTURES}/pipeline/scripts");
    let mut seen = 0;
    for entry in walkdir::WalkDir::new(&dir) {
        let entry = entry.unwrap();
        if !entry.file_name().to_string_lossy().starts_with("crash-validator") {
            continue;
        }
        let b = SessionBundle::load(entry.path()).unwrap();
        let v = parse_feasibility_output(&b.final_output).unwrap();
        assert!(v.feasible || !v.recommendations.is_empty());
        seen += 1;
    }
    assert_eq!(seen, 8);
}

#[test]
fn sanitizer_fixtures_parse() {
    let r = parse_sanitizer_report(&fixture_text("pipeline/sim/asan_getroot.txt")).unwrap();
    assert_eq!(r.crash_type, "heap-buffer-overflow");
    assert_eq!(r.stacktrace.len(), 3);
    let top = r.top_frame().unwrap();
    assert_eq!(top.function, "flexbuffers::GetRoot(unsigned char const*, unsigned long)");
    assert_eq!((top.file.as_str(), top.line), ("src/flexbuffers.cc", 7));
    assert_eq!(r.stacktrace[2].file, "driver+0x4b3f1");

    let r = parse_sanitizer_report(&fixture_text("pipeline/sim/asan_driver_null.txt")).unwrap();
    assert_eq!(r.crash_type, "SEGV");
    assert_eq!(r.top_frame().unwrap().function, "LLVMFuzzerTestOneInput");
    assert!(parse_sanitizer_report("all good\n").is_err());
}

#[test]
fn constraint_fixture_parses() {
    let b = SessionBundle::load(std::path::Path::new(&format!(
        "{FIXTURES}/pipeline/scripts/libraw-crxDecodePlane/function-analyzer.bundle.json"
    )))
    .unwrap();
    let r = parse_constraint_report(&b.final_output).unwrap();
    assert_eq!(r.constraints.len(), 4);
    assert_eq!(r.count(ConstraintCategory::VariableConstraint), 1);
    assert_eq!(r.constraints[0].statement, "The first argument must be a valid pointer to a 'CrxImage' structure.");
    assert_eq!(r.constraints[0].referenced_symbols, ["p", "CrxImage"]);
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 10_000, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn feasibility_parser_is_total(text in verdict_inputs()) {
        if let Ok(v) = parse_feasibility_output(&text) {
            prop_assert!(!v.analysis.is_empty());
            prop_assert!(v.feasible || !v.recommendations.is_empty());
        }
    }

    #[test]
    fn sanitizer_parser_is_total(text in sanitizer_inputs()) {
        if let Ok(r) = parse_sanitizer_report(&text) {
            prop_assert!(!r.crash_type.is_empty());
            prop_assert!(!r.stacktrace.is_empty());
            prop_assert!(r.stacktrace.iter().all(|f| !f.function.is_empty() || f.function == UNKNOWN_FUNCTION));
        }
    }
}

proptest! {
    #[test]
    fn verdict_round_trips(
        feasible in any::<bool>(),
        analysis in "[a-zA-Z0-9 .,()`']{1,80}",
        evidence in "[a-zA-Z0-9 .:/]{0,40}",
        recs in "[a-zA-Z0-9 .]{1,60}",
    ) {
        let v = FeasibilityVerdict {
            feasible,
            analysis: analysis.trim().to_string(),
            source_code_evidence: evidence.trim().to_string(),
            recommendations: recs.trim().to_string(),
        };
        prop_assume!(!v.analysis.is_empty() && !v.recommendations.is_empty());
        prop_assert_eq!(parse_feasibility_output(&serialize_verdict(&v)).unwrap(), v);
    }
}
