use super::ExecutorError;
use crate::analyzers::{CrashReport, StackFrame};

pub const UNKNOWN_FUNCTION: &str = "<unknown>";

/// `ERROR: XSanitizer: kind ...` or `ERROR: libFuzzer: kind ...`.
fn error_kind(line: &str) -> Option<String> {
    let at = line.find("ERROR: ")?;
    let rest = &line[at + "ERROR: ".len()..];
    let (tool, detail) = rest.split_once(':')?;
    let tool = tool.trim();
    if tool.is_empty() || tool.contains(char::is_whitespace) {
        return None;
    }
    let kind = detail.split_whitespace().next()?;
    let kind = kind.trim_end_matches(|c: char| c == ':' || c == ',');
    (!kind.is_empty()).then(|| kind.to_string())
}

/// Splits `file:line[:col]` into (file, line).
fn split_location(loc: &str) -> (String, u32) {
    let mut parts: Vec<&str> = loc.rsplitn(3, ':').collect();
    parts.reverse();
    let numeric = |s: &str| !s.is_empty() && s.chars().all(|c| c.is_ascii_digit());
    match parts.as_slice() {
        [file, line, col] if numeric(line) && numeric(col) => {
            (file.to_string(), line.parse().unwrap_or(0))
        }
        [a, b, line] if numeric(line) => (format!("{a}:{b}"), line.parse().unwrap_or(0)),
        [file, line] if numeric(line) => (file.to_string(), line.parse().unwrap_or(0)),
        _ => (loc.to_string(), 0),
    }
}

/// Parses one `#N 0xADDR in function location` line.
fn parse_frame(line: &str) -> Option<StackFrame> {
    let t = line.trim_start();
    let rest = t.strip_prefix('#')?;
    let digits = rest.chars().take_while(char::is_ascii_digit).count();
    if digits == 0 {
        return None;
    }
    let tag = format!("#{}", &rest[..digits]);
    let mut body = rest[digits..].trim();
    if let Some(first) = body.split_whitespace().next() {
        if first.starts_with("0x") {
            body = body[first.len()..].trim_start();
        }
    }
    let (function, location) = if let Some(after_in) = body.strip_prefix("in ") {
        let after_in = after_in.trim();
        if after_in.starts_with('(') {
            (UNKNOWN_FUNCTION.to_string(), after_in.to_string())
        } else if let Some(paren) = after_in.rfind(" (") {
            // `func (module+0x1234)`
            if after_in.ends_with(')') && !after_in[paren..].contains(':') {
                (after_in[..paren].trim().to_string(), after_in[paren + 1..].to_string())
            } else {
                split_function_location(after_in)
            }
        } else {
            split_function_location(after_in)
        }
    } else {
        (UNKNOWN_FUNCTION.to_string(), body.to_string())
    };
    let function = if function.is_empty() || function == "(<unknown>)" {
        UNKNOWN_FUNCTION.to_string()
    } else {
        function
    };
    let location = location.trim();
    let (file, line) = if location.starts_with('(') {
        (location.trim_matches(|c| c == '(' || c == ')').to_string(), 0)
    } else {
        split_location(location)
    };
    Some(StackFrame {
        function,
        file,
        line,
        sanitizer_tag: tag,
    })
}

/// The location is the last whitespace-separated token when it looks like a
/// path; everything before it is the (possibly spaced) function name.
fn split_function_location(s: &str) -> (String, String) {
    match s.rsplit_once(char::is_whitespace) {
        Some((func, loc)) if loc.contains('/') || loc.contains(':') || loc.contains('.') => {
            (func.trim().to_string(), loc.to_string())
        }
        _ => (s.to_string(), String::new()),
    }
}

/// Extracts the crash kind and the first stack of a sanitizer report. The
/// parser is total: arbitrary text yields either a report or
/// [`ExecutorError::NoCrashFound`].
pub fn parse_sanitizer_report(text: &str) -> Result<CrashReport, ExecutorError> {
    let mut lines = text.lines();
    let mut crash_type = None;
    for line in lines.by_ref() {
        if let Some(kind) = error_kind(line) {
            crash_type = Some(kind);
            break;
        }
    }
    let crash_type = crash_type.ok_or(ExecutorError::NoCrashFound)?;
    let mut frames: Vec<StackFrame> = Vec::new();
    for line in lines {
        match parse_frame(line) {
            Some(f) => {
                if f.sanitizer_tag == "#0" && !frames.is_empty() {
                    break;
                }
                frames.push(f);
            }
            None if !frames.is_empty() => break,
            None => {}
        }
    }
    if frames.is_empty() {
        frames.push(StackFrame {
            function: UNKNOWN_FUNCTION.to_string(),
            file: String::new(),
            line: 0,
            sanitizer_tag: "#0".to_string(),
        });
    }
    Ok(CrashReport {
        crash_type,
        stacktrace: frames,
        logs: text.to_string(),
        root_cause: String::new(),
        classification: None,
    })
}
