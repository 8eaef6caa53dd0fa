//! Brute-force text scan used as the oracle for the symbol index, plus
//! fixture helpers shared by the integration tests.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use fuzzgate_core::toolbox::{check_command, code_search, entry_points, find_callers, CallerRef, ToolLimits};
use fuzzgate_core::{ProjectCheckout, SymbolIndex};
use regex::Regex;

pub fn copy_tree(from: &Path, to: &Path) {
    fs::create_dir_all(to).unwrap();
    for e in fs::read_dir(from).unwrap() {
        let e = e.unwrap();
        let name = e.file_name();
        if name == ".fuzzgate" {
            continue;
        }
        let dst = to.join(&name);
        if e.file_type().unwrap().is_dir() {
            copy_tree(&e.path(), &dst);
        } else {
            fs::copy(e.path(), dst).unwrap();
        }
    }
}


pub const KEYWORDS: &[&str] = &["if", "for", "while", "switch", "return", "sizeof", "catch"];

/// Blanks comments, string and char literals and preprocessor lines.
pub fn strip(src: &str) -> String {
    let mut out = String::new();
    let mut chars = src.chars().peekable();
    let mut at_line_start = true;
    while let Some(c) = chars.next() {
        match c {
            '#' if at_line_start => {
                for d in chars.by_ref() {
                    if d == '\n' {
                        out.push('\n');
                        break;
                    }
                }
                continue;
            }
            '/' if chars.peek() == Some(&'/') => {
                for d in chars.by_ref() {
                    if d == '\n' {
                        out.push('\n');
                        break;
                    }
                }
                at_line_start = true;
                continue;
            }
            '/' if chars.peek() == Some(&'*') => {
                chars.next();
                let mut prev = ' ';
                for d in chars.by_ref() {
                    if d == '\n' {
                        out.push('\n');
                    }
                    if prev == '*' && d == '/' {
                        break;
                    }
                    prev = d;
                }
                out.push(' ');
                continue;
            }
            '"' | '\'' => {
                let mut escaped = false;
                for d in chars.by_ref() {
                    if escaped {
                        escaped = false;
                    } else if d == '\\' {
                        escaped = true;
                    } else if d == c {
                        break;
                    }
                }
                out.push_str("\"\"");
                at_line_start = false;
                continue;
            }
            _ => {}
        }
        out.push(c);
        if c == '\n' {
            at_line_start = true;
        } else if !c.is_whitespace() {
            at_line_start = false;
        }
    }
    out
}

#[derive(Default)]
pub struct Scan {
    pub defs: Vec<(String, String)>,
    /// (caller, callee, file, line)
    pub calls: Vec<(String, String, String, u32)>,
}

pub fn scan_project(root: &Path) -> Scan {
    let name_re = Regex::new(r"([A-Za-z_]\w*(?:::[A-Za-z_]\w*)*)\s*\(").unwrap();
    let ns_re = Regex::new(r"^\s*namespace\s+\w+\s*\{").unwrap();
    let mut scan = Scan::default();
    let mut files: Vec<PathBuf> = walkdir::WalkDir::new(root)
        .into_iter()
        .filter_map(Result::ok)
        .map(|e| e.into_path())
        .filter(|p| p.extension().is_some_and(|x| ["c", "cc", "cpp", "h"].contains(&x.to_str().unwrap())))
        .collect();
    files.sort();
    for path in files {
        let rel = path.strip_prefix(root).unwrap().to_string_lossy().replace('\\', "/");
        let text = strip(&fs::read_to_string(&path).unwrap());
        let mut depth = 0i32;
        let mut ns_depth = 0i32;
        let mut current: Option<String> = None;
        for (i, line) in text.lines().enumerate() {
            let lineno = i as u32 + 1;
            let body_depth = depth - ns_depth;
            if ns_re.is_match(line) && body_depth == 0 {
                ns_depth += 1;
                depth += 1;
                continue;
            }
            if body_depth == 0 && line.trim_end().ends_with('{') {
                if let Some(m) = name_re.captures(line) {
                    let name = m[1].to_string();
                    if !KEYWORDS.contains(&name.as_str()) {
                        scan.defs.push((name.clone(), rel.clone()));
                        current = Some(name);
                    }
                }
            } else if let Some(caller) = &current {
                for m in name_re.captures_iter(line) {
                    let callee = m[1].to_string();
                    if !KEYWORDS.contains(&callee.as_str()) {
                        scan.calls.push((caller.clone(), callee, rel.clone(), lineno));
                    }
                }
            }
            depth += line.matches('{').count() as i32 - line.matches('}').count() as i32;
            if depth - ns_depth <= 0 {
                current = None;
                if depth < ns_depth {
                    ns_depth = depth;
                }
            }
        }
    }
    scan
}

pub fn last(name: &str) -> &str {
    name.rsplit("::").next().unwrap()
}

pub fn oracle_callers(scan: &Scan, bare: &str) -> Vec<CallerRef> {
    let mut out: Vec<CallerRef> = scan
        .calls
        .iter()
        .filter(|(_, callee, _, _)| last(callee) == bare)
        .map(|(caller, _, file, line)| CallerRef {
            caller: caller.clone(),
            file: file.clone(),
            line: *line,
        })
        .collect();
    out.sort_by(|a, b| (&a.file, a.line, &a.caller).cmp(&(&b.file, b.line, &b.caller)));
    out
}

pub fn oracle_is_test(name: &str, file: &str) -> bool {
    let base = last(name);
    let dirs: Vec<&str> = file.split('/').collect();
    base.starts_with("test_")
        || base.ends_with("_test")
        || base.starts_with("Test")
        || dirs[..dirs.len() - 1].iter().any(|d| ["test", "tests", "fuzz"].contains(d))
}

pub fn oracle_entry_points(scan: &Scan) -> Vec<String> {
    let defs: BTreeSet<&str> = scan
        .defs
        .iter()
        .filter(|(n, f)| !oracle_is_test(n, f))
        .map(|(n, _)| n.as_str())
        .collect();
    defs.into_iter()
        .filter(|name| {
            !scan.calls.iter().any(|(caller, callee, file, _)| {
                last(callee) == last(name) && caller != name && !oracle_is_test(caller, file)
            })
        })
        .map(str::to_string)
        .collect()
}

/// Compares every definition, caller list and the entry points of `index`
/// with the oracle's view of `root`. Returns the oracle's entry points.
pub fn compare_with_index(index: &SymbolIndex, root: &Path) -> Result<Vec<String>, String> {
    let scan = scan_project(root);
    let defined: BTreeSet<&str> = scan.defs.iter().map(|(n, _)| last(n)).collect();
    let indexed: BTreeSet<&str> = index.definitions().map(|f| last(&f.name)).collect();
    if indexed != defined {
        return Err(format!("definitions differ: index {indexed:?}, oracle {defined:?}"));
    }
    for bare in &defined {
        let (got, want) = (find_callers(index, bare), oracle_callers(&scan, bare));
        if got != want {
            return Err(format!("callers of {bare}: index {got:?}, oracle {want:?}"));
        }
    }
    let want = oracle_entry_points(&scan);
    let got = entry_points(index);
    if got != want {
        return Err(format!("entry points: index {got:?}, oracle {want:?}"));
    }
    Ok(want)
}

/// Commands the sandbox must refuse when run in the libraw fixture:
/// writes, escapes from the root, redirection, chaining, substitution and
/// programs outside the allow-list.
pub const ADVERSARIAL: &[&str] = &[
    "rm -rf .",
    "touch src/new.c",
    "sed -i s/a/b/ src/crx.cpp",
    "find . -name '*.cpp' -delete",
    "find . -exec rm {} ;",
    "find . -fprint /tmp/out",
    "sed -n 'w /tmp/x' src/crx.cpp",
    "cat ../../etc/passwd",
    "cat /etc/passwd",
    "grep -r root /etc",
    "ls ..",
    "tail src/../../x",
    "find / -name passwd",
    "head ~/.bashrc",
    "cat outside_link",
    "cat src/crx.cpp > /tmp/x",
    "grep -rn main . ; rm -rf .",
    "grep -rn main . && rm src/crx.cpp",
    "cat $(echo /etc/passwd)",
    "cat `echo /etc/passwd`",
    "cp src/crx.cpp /tmp/x",
    "mv src/crx.cpp src/y.cpp",
    "chmod 777 src/crx.cpp",
    "sh -c 'cat /etc/passwd'",
    "python3 -c 'print(1)'",
];

/// Members of [`ADVERSARIAL`] the sandbox let through. `outside` is a file
/// outside the checkout; a symlink to it is planted as `outside_link`.
pub fn adversarial_accepted(checkout: &ProjectCheckout, outside: &Path) -> Vec<&'static str> {
    fs::write(outside, "secret\n").unwrap();
    let link = checkout.root().join("outside_link");
    if link.symlink_metadata().is_err() {
        std::os::unix::fs::symlink(outside, &link).unwrap();
    }
    let limits = ToolLimits::default();
    ADVERSARIAL
        .iter()
        .copied()
        .filter(|cmd| check_command(checkout, cmd).is_ok() || code_search(checkout, cmd, &limits).is_ok())
        .collect()
}
