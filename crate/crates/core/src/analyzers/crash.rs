use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StackFrame {
    pub function: String,
    pub file: String,
    /// 0 when the sanitizer gave no line.
    pub line: u32,
    /// Frame label as printed by the sanitizer, e.g. `#0`.
    pub sanitizer_tag: String,
}

/// Who is at fault for a crash.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Classification {
    ProgramError,
    FuzzDriverError,
}

impl FromStr for Classification {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key: String = s
            .chars()
            .filter(char::is_ascii_alphanumeric)
            .map(|c| c.to_ascii_lowercase())
            .collect();
        match key.as_str() {
            "programerror" | "program" | "projecterror" => Ok(Classification::ProgramError),
            "fuzzdrivererror" | "drivererror" | "fuzzdriver" | "driver" => {
                Ok(Classification::FuzzDriverError)
            }
            _ => Err(format!("unknown crash classification `{}`", s.trim())),
        }
    }
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Classification::ProgramError => "ProgramError",
            Classification::FuzzDriverError => "FuzzDriverError",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CrashReport {
    pub crash_type: String,
    pub stacktrace: Vec<StackFrame>,
    #[serde(default)]
    pub logs: String,
    #[serde(default)]
    pub root_cause: String,
    #[serde(default)]
    pub classification: Option<Classification>,
}

impl CrashReport {
    pub fn top_frame(&self) -> Option<&StackFrame> {
        self.stacktrace.first()
    }

    /// One `#N function file:line` line per frame.
    pub fn render_stacktrace(&self) -> String {
        self.stacktrace
            .iter()
            .map(|f| {
                if f.line > 0 {
                    format!("{} {} {}:{}", f.sanitizer_tag, f.function, f.file, f.line)
                } else if f.file.is_empty() {
                    format!("{} {}", f.sanitizer_tag, f.function)
                } else {
                    format!("{} {} {}", f.sanitizer_tag, f.function, f.file)
                }
            })
            .collect::<Vec<_>>()
            .join("\n")
    }
}
