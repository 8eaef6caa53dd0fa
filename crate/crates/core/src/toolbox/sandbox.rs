//! Read-only shell search inside a checkout.
//!
//! Commands are tokenized here and executed directly (no shell). Only
//! pipelines of allowlisted read-only programs are accepted, every path-like
//! argument must resolve under the checkout root, and output is capped.

use std::io::{Read, Write};
use std::path::Path;
use std::process::{Command, Stdio};
use std::thread;
use std::time::{Duration, Instant};

use regex::Regex;
use serde::{Deserialize, Serialize};
use wait_timeout::ChildExt;

use super::{resolve_under, ProjectCheckout, ToolError, ToolLimits};

const ALLOWED_PROGRAMS: [&str; 8] = ["grep", "cat", "ls", "find", "head", "tail", "wc", "sed"];

/// Intermediate pipeline stages are capped well above the final output cap.
const PIPE_BUFFER_CAP: usize = 16 * 1024 * 1024;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommandResult {
    pub command: String,
    pub exit_status: i32,
    pub stdout: String,
    pub stderr: String,
    pub truncated: bool,
}

impl CommandResult {
    /// Text handed back to the model.
    pub fn render(&self) -> String {
        let mut out = format!("exit_status: {}\n", self.exit_status);
        out.push_str(&self.stdout);
        if self.truncated {
            out.push_str("\n[output truncated]");
        }
        if !self.stderr.trim().is_empty() {
            out.push_str("\nstderr: ");
            out.push_str(self.stderr.trim_end());
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stage {
    pub program: String,
    pub args: Vec<String>,
}

#[derive(Debug, PartialEq)]
enum Lexed {
    Word { text: String, glob: bool },
    Pipe,
}

fn disallowed(msg: impl Into<String>) -> ToolError {
    ToolError::DisallowedCommand(msg.into())
}

/// Splits a command line into words and pipe separators with POSIX-style
/// quoting. Unquoted shell operators other than `|` are rejected outright.
#[allow(unused_assignments)]
fn lex(command: &str) -> Result<Vec<Lexed>, ToolError> {
    let mut out = Vec::new();
    let mut chars = command.chars().peekable();
    let mut word = String::new();
    let mut in_word = false;
    let mut glob = false;

    macro_rules! flush {
        () => {
            if in_word {
                out.push(Lexed::Word {
                    text: std::mem::take(&mut word),
                    glob,
                });
                in_word = false;
                glob = false;
            }
        };
    }

    while let Some(c) = chars.next() {
        match c {
            ' ' | '\t' => flush!(),
            '\'' => {
                in_word = true;
                loop {
                    match chars.next() {
                        Some('\'') => break,
                        Some(ch) => word.push(ch),
                        None => return Err(disallowed("unterminated single quote")),
                    }
                }
            }
            '"' => {
                in_word = true;
                loop {
                    match chars.next() {
                        Some('"') => break,
                        Some('\\') => match chars.next() {
                            Some(ch @ ('"' | '\\' | '$' | '`')) => word.push(ch),
                            Some(ch) => {
                                word.push('\\');
                                word.push(ch);
                            }
                            None => return Err(disallowed("unterminated double quote")),
                        },
                        Some(ch) => word.push(ch),
                        None => return Err(disallowed("unterminated double quote")),
                    }
                }
            }
            '\\' => {
                in_word = true;
                match chars.next() {
                    Some(ch) => word.push(ch),
                    None => return Err(disallowed("trailing backslash")),
                }
            }
            '|' => {
                if chars.peek() == Some(&'|') {
                    return Err(disallowed("operator `||` is not permitted"));
                }
                flush!();
                out.push(Lexed::Pipe);
            }
            ';' | '&' | '>' | '<' | '`' | '$' | '(' | ')' | '\n' | '\r' => {
                return Err(disallowed(format!(
                    "shell operator `{}` is not permitted",
                    c.escape_default()
                )));
            }
            '*' | '?' | '[' => {
                in_word = true;
                glob = true;
                word.push(c);
            }
            _ => {
                in_word = true;
                word.push(c);
            }
        }
    }
    flush!();
    Ok(out)
}

fn looks_like_path(arg: &str) -> bool {
    arg == ".."
        || arg.starts_with('/')
        || arg.starts_with('~')
        || arg.contains('/')
}

fn check_path_arg(root: &Path, arg: &str) -> Result<(), ToolError> {
    let candidate = if arg.starts_with('-') {
        match arg.split_once('=') {
            Some((_, v)) => v,
            None => return Ok(()),
        }
    } else {
        arg
    };
    // a bare name that exists in the root may still be a symlink out of it
    if looks_like_path(candidate) || root.join(candidate).symlink_metadata().is_ok() {
        resolve_under(root, candidate)?;
    }
    Ok(())
}

fn sed_script_regex() -> &'static Regex {
    static RE: std::sync::OnceLock<Regex> = std::sync::OnceLock::new();
    RE.get_or_init(|| {
        let addr = r"(?:\d+|\$|/(?:[^/\\]|\\.)*/)";
        Regex::new(&format!(
            r"^\s*(?:{addr}(?:\s*,\s*(?:{addr}|\+\d+))?)?\s*!?\s*[pd=lq]\s*$"
        ))
        .expect("static regex")
    })
}

fn check_program(stage: &Stage) -> Result<(), ToolError> {
    let prog = stage.program.as_str();
    if !ALLOWED_PROGRAMS.contains(&prog) {
        return Err(disallowed(format!(
            "`{prog}` is not an allowed program (allowed: {})",
            ALLOWED_PROGRAMS.join(", ")
        )));
    }
    match prog {
        "find" => {
            const WRITING: [&str; 9] = [
                "-delete", "-exec", "-execdir", "-ok", "-okdir", "-fprint", "-fprint0",
                "-fprintf", "-fls",
            ];
            if let Some(a) = stage.args.iter().find(|a| WRITING.contains(&a.as_str())) {
                return Err(disallowed(format!("find action `{a}` is not permitted")));
            }
        }
        "head" | "tail" => {
            if let Some(a) = stage
                .args
                .iter()
                .find(|a| matches!(a.as_str(), "-f" | "-F" | "--follow") || a.starts_with("--follow="))
            {
                return Err(disallowed(format!("`{prog} {a}` never terminates")));
            }
        }
        "sed" => check_sed(&stage.args)?,
        _ => {}
    }
    Ok(())
}

/// Only print-style sed scripts are allowed (`N,Mp`, `/re/p`, `$p`, ...).
fn check_sed(args: &[String]) -> Result<(), ToolError> {
    let mut scripts = Vec::new();
    let mut explicit = false;
    let mut i = 0;
    let mut first_operand = None;
    while i < args.len() {
        let a = args[i].as_str();
        match a {
            "-n" | "--quiet" | "--silent" | "-E" | "-r" | "--regexp-extended" | "-s" | "-u" => {}
            "-e" | "--expression" => {
                explicit = true;
                i += 1;
                let s = args
                    .get(i)
                    .ok_or_else(|| disallowed("sed -e without a script"))?;
                scripts.push(s.clone());
            }
            _ if a.starts_with("--expression=") => {
                explicit = true;
                scripts.push(a["--expression=".len()..].to_string());
            }
            _ if a.starts_with('-') && a.len() > 1 => {
                return Err(disallowed(format!("sed option `{a}` is not permitted")));
            }
            _ => {
                if first_operand.is_none() {
                    first_operand = Some(i);
                }
            }
        }
        i += 1;
    }
    if !explicit {
        let idx = first_operand.ok_or_else(|| disallowed("sed without a script"))?;
        scripts.push(args[idx].clone());
    }
    for script in scripts {
        for part in script.split(';') {
            if part.trim().is_empty() {
                continue;
            }
            if !sed_script_regex().is_match(part) {
                return Err(disallowed(format!(
                    "sed script `{part}` is not a read-only print form"
                )));
            }
        }
    }
    Ok(())
}

/// Indices of arguments that are patterns or scripts rather than paths.
fn pattern_operands(stage: &Stage) -> Vec<usize> {
    let args = &stage.args;
    let mut out = Vec::new();
    match stage.program.as_str() {
        "grep" => {
            let mut explicit = false;
            let mut i = 0;
            let mut positional = None;
            while i < args.len() {
                let a = args[i].as_str();
                match a {
                    "-e" | "--regexp" => {
                        explicit = true;
                        out.push(i + 1);
                        i += 1;
                    }
                    "-m" | "-A" | "-B" | "-C" | "-d" | "-D" | "--max-count" | "--context" => {
                        out.push(i + 1);
                        i += 1;
                    }
                    "-f" | "--file" => i += 1,
                    _ if a.starts_with("--regexp=") => {
                        explicit = true;
                        out.push(i);
                    }
                    _ if a.starts_with("--include=") || a.starts_with("--exclude=") => out.push(i),
                    _ if a.starts_with('-') && a.len() > 1 => {}
                    _ => {
                        if positional.is_none() {
                            positional = Some(i);
                        }
                    }
                }
                i += 1;
            }
            if !explicit {
                out.extend(positional);
            }
        }
        "sed" => {
            let mut explicit = false;
            let mut positional = None;
            let mut i = 0;
            while i < args.len() {
                let a = args[i].as_str();
                if a == "-e" || a == "--expression" {
                    explicit = true;
                    out.push(i + 1);
                    i += 1;
                } else if a.starts_with("--expression=") {
                    explicit = true;
                    out.push(i);
                } else if !(a.starts_with('-') && a.len() > 1) && positional.is_none() {
                    positional = Some(i);
                }
                i += 1;
            }
            if !explicit {
                out.extend(positional);
            }
        }
        "find" => {
            // values of name-matching predicates are patterns
            for (i, a) in args.iter().enumerate() {
                if matches!(
                    a.as_str(),
                    "-name" | "-iname" | "-regex" | "-iregex" | "-wholename" | "-iwholename"
                ) {
                    out.push(i + 1);
                }
            }
        }
        _ => {}
    }
    out
}

fn expand_globs(root: &Path, pattern: &str) -> Result<Vec<String>, ToolError> {
    resolve_under(root, pattern.split(['*', '?', '[']).next().unwrap_or(""))?;
    let full = root.join(pattern);
    let Some(full_str) = full.to_str() else {
        return Ok(vec![pattern.to_string()]);
    };
    let mut matches = Vec::new();
    if let Ok(paths) = glob::glob(full_str) {
        for p in paths.flatten() {
            if let Ok(rel) = p.strip_prefix(root) {
                matches.push(rel.to_string_lossy().into_owned());
            }
        }
    }
    matches.sort();
    if matches.is_empty() {
        // no match leaves the pattern literal, like an interactive shell
        matches.push(pattern.to_string());
    }
    Ok(matches)
}

/// Parses and validates a command against the sandbox policy without running
/// it. Returns the pipeline stages with globs expanded.
pub fn check_command(checkout: &ProjectCheckout, command: &str) -> Result<Vec<Stage>, ToolError> {
    let root = checkout.root();
    let lexed = lex(command)?;
    let mut stages = Vec::new();
    let mut current: Vec<String> = Vec::new();
    let finish = |words: &mut Vec<String>, stages: &mut Vec<Stage>| -> Result<(), ToolError> {
        if words.is_empty() {
            return Err(disallowed("empty pipeline stage"));
        }
        let program = words.remove(0);
        stages.push(Stage {
            program,
            args: std::mem::take(words),
        });
        Ok(())
    };
    for item in lexed {
        match item {
            Lexed::Pipe => finish(&mut current, &mut stages)?,
            Lexed::Word { text, glob } => {
                if glob && !current.is_empty() && !text.starts_with('-') {
                    current.extend(expand_globs(root, &text)?);
                } else {
                    current.push(text);
                }
            }
        }
    }
    finish(&mut current, &mut stages)?;
    for stage in &stages {
        check_program(stage)?;
        let skip = pattern_operands(stage);
        for (i, arg) in stage.args.iter().enumerate() {
            if !skip.contains(&i) {
                check_path_arg(root, arg)?;
            }
        }
    }
    Ok(stages)
}

fn read_capped(mut r: impl Read, cap: usize) -> (Vec<u8>, bool) {
    let mut kept = Vec::new();
    let mut buf = [0u8; 8192];
    let mut overflow = false;
    loop {
        match r.read(&mut buf) {
            Ok(0) | Err(_) => break,
            Ok(n) => {
                let room = cap.saturating_sub(kept.len());
                if n > room {
                    overflow = true;
                }
                kept.extend_from_slice(&buf[..n.min(room)]);
            }
        }
    }
    (kept, overflow)
}

struct StageOutput {
    status: i32,
    stdout: Vec<u8>,
    stdout_overflow: bool,
    stderr: Vec<u8>,
}

fn run_stage(
    root: &Path,
    stage: &Stage,
    input: Option<Vec<u8>>,
    deadline: Instant,
    timeout: Duration,
    cap: usize,
) -> Result<StageOutput, ToolError> {
    let mut cmd = Command::new(&stage.program);
    cmd.args(&stage.args)
        .current_dir(root)
        .env_clear()
        .env("PATH", std::env::var_os("PATH").unwrap_or_default())
        .env("LC_ALL", "C")
        .stdin(if input.is_some() {
            Stdio::piped()
        } else {
            Stdio::null()
        })
        .stdout(Stdio::piped())
        .stderr(Stdio::piped());
    let mut child = cmd
        .spawn()
        .map_err(|e| ToolError::io(&stage.program, e))?;

    let writer = match (input, child.stdin.take()) {
        (Some(bytes), Some(mut stdin)) => Some(thread::spawn(move || {
            // the reader may exit early (e.g. head); a broken pipe is fine
            let _ = stdin.write_all(&bytes);
        })),
        _ => None,
    };
    let stdout = child.stdout.take().expect("piped stdout");
    let stderr = child.stderr.take().expect("piped stderr");
    let out_reader = thread::spawn(move || read_capped(stdout, cap));
    let err_reader = thread::spawn(move || read_capped(stderr, cap));

    let remaining = deadline.saturating_duration_since(Instant::now());
    let status = match child.wait_timeout(remaining) {
        Ok(Some(status)) => status,
        Ok(None) => {
            let _ = child.kill();
            let _ = child.wait();
            return Err(ToolError::Timeout(timeout));
        }
        Err(e) => return Err(ToolError::io(&stage.program, e)),
    };
    if let Some(w) = writer {
        let _ = w.join();
    }
    let (stdout, stdout_overflow) = out_reader.join().unwrap_or_default();
    let (stderr, _) = err_reader.join().unwrap_or_default();
    Ok(StageOutput {
        status: status.code().unwrap_or(-1),
        stdout,
        stdout_overflow,
        stderr,
    })
}

/// Truncates to at most `cap` bytes on a char boundary.
fn truncate_utf8(mut s: String, cap: usize) -> (String, bool) {
    if s.len() <= cap {
        return (s, false);
    }
    let mut cut = cap;
    while !s.is_char_boundary(cut) {
        cut -= 1;
    }
    s.truncate(cut);
    (s, true)
}

/// Runs a read-only search command in the checkout root.
pub fn code_search(
    checkout: &ProjectCheckout,
    command: &str,
    limits: &ToolLimits,
) -> Result<CommandResult, ToolError> {
    let stages = check_command(checkout, command)?;
    let deadline = Instant::now() + limits.timeout;
    let mut input: Option<Vec<u8>> = None;
    let mut stderr = Vec::new();
    let mut last = None;
    for (i, stage) in stages.iter().enumerate() {
        let cap = if i + 1 == stages.len() {
            // one extra byte tells us whether the cap was hit
            limits.output_cap_bytes.saturating_add(1)
        } else {
            PIPE_BUFFER_CAP
        };
        let out = run_stage(checkout.root(), stage, input.take(), deadline, limits.timeout, cap)?;
        stderr.extend_from_slice(&out.stderr);
        input = Some(out.stdout.clone());
        last = Some(out);
    }
    let last = last.expect("at least one stage");
    let (stdout, truncated) = truncate_utf8(
        String::from_utf8_lossy(&last.stdout).into_owned(),
        limits.output_cap_bytes,
    );
    let (stderr, _) = truncate_utf8(
        String::from_utf8_lossy(&stderr).into_owned(),
        limits.output_cap_bytes,
    );
    Ok(CommandResult {
        command: command.to_string(),
        exit_status: last.status,
        stdout,
        stderr,
        truncated: truncated || last.stdout_overflow,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::toolbox::Language;

    fn checkout() -> (tempfile::TempDir, ProjectCheckout) {
        let dir = tempfile::tempdir().unwrap();
        std::fs::create_dir(dir.path().join("src")).unwrap();
        std::fs::write(
            dir.path().join("src/a.c"),
            "int helper(int x) { return x; }\nint api(void) { return helper(2); }\n",
        )
        .unwrap();
        std::fs::write(dir.path().join("src/b.c"), "int other(void) { return 0; }\n").unwrap();
        let co = ProjectCheckout::open("p", dir.path(), Language::C).unwrap();
        (dir, co)
    }

    #[test]
    fn lexing_handles_quotes_and_pipes() {
        let toks = lex(r#"grep -rn "a b" 'c|d' | head -n 3"#).unwrap();
        assert_eq!(toks.len(), 8);
        assert_eq!(toks[4], Lexed::Pipe);
        assert_eq!(
            toks[2],
            Lexed::Word {
                text: "a b".into(),
                glob: false
            }
        );
        assert_eq!(
            toks[3],
            Lexed::Word {
                text: "c|d".into(),
                glob: false
            }
        );
    }

    #[test]
    fn grep_matches_and_no_match() {
        let (_d, co) = checkout();
        let lim = ToolLimits::default();
        let r = code_search(&co, "grep -rn helper .", &lim).unwrap();
        assert_eq!(r.exit_status, 0);
        assert!(r.stdout.contains("src/a.c:1:"));
        let r = code_search(&co, "grep -rn no_such_symbol_xyz .", &lim).unwrap();
        assert_eq!(r.exit_status, 1);
        assert!(r.stdout.is_empty());
    }

    #[test]
    fn pipelines_run_in_order() {
        let (_d, co) = checkout();
        let r = code_search(&co, "cat src/a.c | wc -l", &ToolLimits::default()).unwrap();
        assert_eq!(r.stdout.trim(), "2");
    }

    #[test]
    fn globs_expand_relative_to_root() {
        let (_d, co) = checkout();
        let r = code_search(&co, "wc -l src/*.c", &ToolLimits::default()).unwrap();
        assert!(r.stdout.contains("src/a.c") && r.stdout.contains("src/b.c"));
    }

    #[test]
    fn output_cap_applies() {
        let (_d, co) = checkout();
        let lim = ToolLimits {
            output_cap_bytes: 10,
            ..ToolLimits::default()
        };
        let r = code_search(&co, "cat src/a.c", &lim).unwrap();
        assert!(r.truncated);
        assert_eq!(r.stdout.len(), 10);
        let r = code_search(&co, "cat src/b.c", &ToolLimits::default()).unwrap();
        assert!(!r.truncated);
    }

    #[test]
    fn sed_print_forms_only() {
        let (_d, co) = checkout();
        assert!(check_command(&co, "sed -n '1,2p' src/a.c").is_ok());
        assert!(check_command(&co, "sed -n '/helper/p' src/a.c").is_ok());
        assert!(check_command(&co, "sed -n -e 1p -e '$p' src/a.c").is_ok());
        assert!(check_command(&co, "sed -i s/a/b/ src/a.c").is_err());
        assert!(check_command(&co, "sed -n '1w /tmp/x' src/a.c").is_err());
        assert!(check_command(&co, "sed s/a/b/ src/a.c").is_err());
    }

    #[test]
    fn timeout_kills() {
        let (d, co) = checkout();
        // a FIFO with no writer blocks `cat` forever
        let status = std::process::Command::new("mkfifo")
            .arg(d.path().join("stuck"))
            .status()
            .unwrap();
        assert!(status.success());
        let lim = ToolLimits {
            timeout: Duration::from_millis(300),
            ..ToolLimits::default()
        };
        let started = Instant::now();
        let err = code_search(&co, "cat stuck", &lim);
        assert!(matches!(err, Err(ToolError::Timeout(_))), "{err:?}");
        assert!(started.elapsed() < Duration::from_secs(5));
    }
}
