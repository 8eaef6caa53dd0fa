//! Input generators for parser robustness tests.

use proptest::prelude::*;

// resolves from any crate of the workspace
pub const FIXTURES: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../core/tests/fixtures");

pub fn fixture_text(rel: &str) -> String {
    std::fs::read_to_string(format!("{FIXTURES}/{rel}")).unwrap()
}

const VERDICT_PIECES: &[&str] = &[
    "<feasible>", "</feasible>", "True", "False", " maybe ", "<analysis>", "</analysis>",
    "<source_code_evidence>", "</source_code_evidence>", "<recommendations>", "</recommendations>",
    "<", ">", "</", "/>", "<feasible", "text", "\n", "<!-- x -->", "<analysis attr=\"1\">", "\u{0}",
    "é", "<<", ">>", "<recommendations/>",
];

const SANITIZER_PIECES: &[&str] = &[
    "==1==ERROR: AddressSanitizer: ", "heap-buffer-overflow", "SEGV", " on address 0x1",
    "ERROR: libFuzzer: deadly signal", "\n", "    #0 0x4a in ", "    #1 ", "#", "#x", "0x",
    "f(int) ", "src/a.c:10:2", "a.c:", ":", " (lib.so+0x12)", "in ", "(<unknown>)", "SUMMARY: ",
    "ERROR: ", "ERROR: : x", "ERROR: A B: c", "\t", "\u{fffd}", "#99999999999999999999 ",
];

fn pieces(set: &'static [&'static str]) -> impl Strategy<Value = String> {
    prop::collection::vec(prop::sample::select(set), 0..40).prop_map(|v| v.concat())
}

/// Deletes, duplicates or inserts at random char positions of `base`.
fn mutated(base: String) -> impl Strategy<Value = String> {
    let chars: Vec<char> = base.chars().collect();
    let n = chars.len().max(1);
    prop::collection::vec((0..3u8, 0..n, any::<char>()), 1..12).prop_map(move |edits| {
        let mut c = chars.clone();
        for (op, at, ch) in edits {
            let at = at.min(c.len());
            match op {
                0 if at < c.len() => {
                    c.remove(at);
                }
                1 => c.insert(at, ch),
                _ => c.truncate(at),
            }
        }
        c.into_iter().collect()
    })
}

/// Arbitrary text, tag soup built from verdict fragments, and mutations of
/// the well-formed verdict fixtures.
pub fn verdict_inputs() -> impl Strategy<Value = String> {
    prop_oneof![
        any::<String>(),
        pieces(VERDICT_PIECES),
        mutated(fixture_text("text/getroot_verdict.txt")),
        mutated(fixture_text("cli/variants/crash-validator.attempt-2.bundle.json")),
    ]
}

/// Arbitrary text, line soup from sanitizer fragments, and mutations of the
/// sanitizer logs used by the simulated projects.
pub fn sanitizer_inputs() -> impl Strategy<Value = String> {
    prop_oneof![
        any::<String>(),
        pieces(SANITIZER_PIECES),
        mutated(fixture_text("pipeline/sim/asan_getroot.txt")),
        mutated(fixture_text("pipeline/sim/asan_crx_tiles.txt")),
        mutated(fixture_text("pipeline/sim/asan_driver_null.txt")),
    ]
}
