//! Output parsers for the writer and analyzer agents of the base pipeline.

use crate::analyzers::Classification;
use crate::executor::DRIVER_ENTRY;
use crate::markup;

fn section(text: &str, tag: &str) -> Result<Option<String>, String> {
    markup::find_first(text, tag)
        .map(|e| e.map(|e| e.content.to_string()))
        .map_err(|e| e.to_string())
}

/// Driver source from a `<fuzz_driver>` section. Surrounding blank lines are
/// dropped; the body is otherwise kept byte for byte.
pub fn parse_driver_output(text: &str) -> Result<String, String> {
    let body = section(text, "fuzz_driver")?.ok_or("missing <fuzz_driver> section")?;
    let body = body.trim_matches(|c| c == '\n' || c == '\r');
    if body.trim().is_empty() {
        return Err("empty <fuzz_driver> section".into());
    }
    if !body.contains(DRIVER_ENTRY) {
        return Err(format!("driver does not define {DRIVER_ENTRY}"));
    }
    Ok(format!("{body}\n"))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CrashAnalysis {
    pub classification: Classification,
    pub root_cause: String,
}

pub fn parse_crash_analysis(text: &str) -> Result<CrashAnalysis, String> {
    let raw = section(text, "classification")?.ok_or("missing <classification> section")?;
    let classification = raw.trim().parse()?;
    let root_cause = section(text, "root_cause")?
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .ok_or("missing or empty <root_cause> section")?;
    Ok(CrashAnalysis {
        classification,
        root_cause,
    })
}

pub fn parse_coverage_analysis(text: &str) -> Result<String, String> {
    section(text, "insight")?
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .ok_or_else(|| "missing or empty <insight> section".to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn driver_section() {
        let out = "Here it is.\n<fuzz_driver>\n#include <stdint.h>\nint LLVMFuzzerTestOneInput(const uint8_t *d, size_t n) { return 0; }\n</fuzz_driver>";
        let d = parse_driver_output(out).unwrap();
        assert!(d.starts_with("#include <stdint.h>"));
        assert!(parse_driver_output("<fuzz_driver>int main(){}</fuzz_driver>").is_err());
        assert!(parse_driver_output("no section").is_err());
    }

    #[test]
    fn crash_analysis() {
        let a = parse_crash_analysis(
            "<classification> Program Error </classification><root_cause>off by one</root_cause>",
        )
        .unwrap();
        assert_eq!(a.classification, Classification::ProgramError);
        assert!(parse_crash_analysis("<classification>maybe</classification><root_cause>x</root_cause>").is_err());
        assert!(parse_crash_analysis("<classification>driver</classification>").is_err());
    }
}
