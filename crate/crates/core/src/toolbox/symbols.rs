//! Heuristic C/C++ symbol index.
//!
//! Source is scrubbed of comments, literals and preprocessor lines, then
//! scanned with brace tracking. Function definitions are recognized at file
//! scope (namespaces and `extern "C"` blocks are transparent; class bodies
//! are skipped, so only out-of-line member definitions are indexed). Call
//! sites are `name(` occurrences inside a definition body.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use walkdir::WalkDir;

use super::{ProjectCheckout, ToolError, METADATA_DIR};

const SOURCE_EXTENSIONS: [&str; 10] = ["c", "h", "cc", "cpp", "cxx", "c++", "hh", "hpp", "hxx", "inl"];

const CONTROL_KEYWORDS: &[&str] = &[
    "if", "for", "while", "switch", "return", "sizeof", "alignof", "_Alignof", "decltype",
    "typeof", "__typeof__", "catch", "static_assert", "_Static_assert", "defined", "new",
    "delete", "throw", "case", "do", "else", "goto", "noexcept", "alignas", "asm", "__asm__",
    "__asm", "__attribute__", "__attribute", "__declspec", "operator", "co_return", "co_await",
    "co_yield", "_Generic", "offsetof", "__builtin_offsetof", "template", "using",
];

const TYPE_KEYWORDS: &[&str] = &[
    "void", "char", "short", "int", "long", "float", "double", "signed", "unsigned", "bool",
    "_Bool", "auto", "const", "volatile", "static", "extern", "inline", "struct", "union", "enum",
    "class", "typename", "register", "restrict", "__restrict", "wchar_t", "char16_t", "char32_t",
];

/// Keywords that may directly precede a call expression.
const CALL_PREFIX_KEYWORDS: &[&str] = &["return", "else", "case", "do", "throw", "co_return", "co_yield", "co_await"];

/// One declaration or definition of a function.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunctionEntry {
    pub name: String,
    pub file: String,
    pub line_start: u32,
    pub line_end: u32,
    pub signature: String,
    pub is_definition: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CallEdge {
    pub caller: String,
    pub callee: String,
    pub file: String,
    pub line: u32,
    /// No indexed declaration or definition matches the callee.
    #[serde(default)]
    pub external: bool,
}

/// Persisted form: `{functions: [...], call_edges: [...]}`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymbolIndex {
    functions: Vec<FunctionEntry>,
    call_edges: Vec<CallEdge>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunctionMatch {
    pub signature: String,
    pub source_text: String,
    pub file: String,
    pub line_start: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CallerRef {
    pub caller: String,
    pub file: String,
    pub line: u32,
}

impl SymbolIndex {
    pub fn functions(&self) -> &[FunctionEntry] {
        &self.functions
    }

    pub fn call_edges(&self) -> &[CallEdge] {
        &self.call_edges
    }

    pub fn definitions(&self) -> impl Iterator<Item = &FunctionEntry> {
        self.functions.iter().filter(|f| f.is_definition)
    }

    /// Entries grouped by qualified name.
    pub fn entries(&self) -> BTreeMap<&str, Vec<&FunctionEntry>> {
        let mut map: BTreeMap<&str, Vec<&FunctionEntry>> = BTreeMap::new();
        for f in &self.functions {
            map.entry(f.name.as_str()).or_default().push(f);
        }
        map
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("index serializes");
        s.push('\n');
        s
    }

    pub fn save(&self, checkout: &ProjectCheckout) -> Result<(), ToolError> {
        let path = checkout.index_path();
        let dir = checkout.metadata_dir();
        fs::create_dir_all(&dir).map_err(|e| ToolError::io(&dir, e))?;
        crate::fsutil::write_atomic(&path, self.to_json().as_bytes())
            .map_err(|e| ToolError::io(&path, e))
    }

    pub fn load(checkout: &ProjectCheckout) -> Result<Self, ToolError> {
        Self::load_from(&checkout.index_path())
    }

    pub fn load_from(path: &Path) -> Result<Self, ToolError> {
        let text = fs::read_to_string(path).map_err(|e| ToolError::io(path, e))?;
        serde_json::from_str(&text).map_err(|source| ToolError::BadIndex {
            path: path.to_path_buf(),
            source,
        })
    }
}

fn last_segment(name: &str) -> &str {
    name.rsplit("::").next().unwrap_or(name)
}

/// Whether a queried name refers to an indexed (possibly qualified) name.
/// Unqualified names match on the last `::` segment.
pub fn symbol_matches(query: &str, name: &str) -> bool {
    if query == name {
        return true;
    }
    match (query.contains("::"), name.contains("::")) {
        (false, _) => last_segment(name) == query,
        (true, false) => last_segment(query) == name,
        (true, true) => {
            name.ends_with(&format!("::{query}")) || query.ends_with(&format!("::{name}"))
        }
    }
}

fn in_test_dir(file: &str) -> bool {
    let parts: Vec<&str> = file.split('/').collect();
    parts[..parts.len().saturating_sub(1)]
        .iter()
        .any(|d| matches!(*d, "test" | "tests" | "fuzz"))
}

/// Test filter: names with a `test_` / `Test` prefix or `_test` suffix, and
/// anything defined under a `test`, `tests` or `fuzz` directory.
pub fn is_test_function(name: &str, file: &str) -> bool {
    let base = last_segment(name);
    base.starts_with("test_") || base.ends_with("_test") || base.starts_with("Test") || in_test_dir(file)
}

// ---------------------------------------------------------------------------
// scrubbing and tokenizing

/// Replaces comments, string/char literal bodies and preprocessor lines with
/// spaces, keeping newlines so byte offsets and line numbers are preserved.
fn scrub(src: &str) -> String {
    let b = src.as_bytes();
    let mut out = b.to_vec();
    let blank = |out: &mut Vec<u8>, i: usize| {
        if out[i] != b'\n' {
            out[i] = b' ';
        }
    };
    let mut i = 0;
    let mut line_start = true;
    while i < b.len() {
        let c = b[i];
        if line_start && (c == b' ' || c == b'\t') {
            i += 1;
            continue;
        }
        if line_start && c == b'#' {
            // preprocessor directive with backslash continuations
            while i < b.len() {
                if b[i] == b'\n' {
                    let continued = i > 0 && b[i - 1] == b'\\';
                    if !continued {
                        break;
                    }
                }
                blank(&mut out, i);
                i += 1;
            }
            continue;
        }
        line_start = false;
        match c {
            b'\n' => {
                line_start = true;
                i += 1;
            }
            b'/' if b.get(i + 1) == Some(&b'/') => {
                while i < b.len() && b[i] != b'\n' {
                    blank(&mut out, i);
                    i += 1;
                }
            }
            b'/' if b.get(i + 1) == Some(&b'*') => {
                blank(&mut out, i);
                blank(&mut out, i + 1);
                i += 2;
                while i < b.len() && !(b[i] == b'*' && b.get(i + 1) == Some(&b'/')) {
                    blank(&mut out, i);
                    i += 1;
                }
                if i < b.len() {
                    blank(&mut out, i);
                    blank(&mut out, i + 1);
                    i += 2;
                }
            }
            b'"' | b'\'' => {
                let quote = c;
                i += 1;
                while i < b.len() && b[i] != quote && b[i] != b'\n' {
                    if b[i] == b'\\' && i + 1 < b.len() {
                        blank(&mut out, i);
                        i += 1;
                    }
                    blank(&mut out, i);
                    i += 1;
                }
                i += 1;
            }
            _ => i += 1,
        }
    }
    // only ASCII bytes were substituted and whole multi-byte runs were either
    // kept or blanked, but fall back to lossy decoding just in case
    String::from_utf8(out).unwrap_or_else(|e| String::from_utf8_lossy(e.as_bytes()).into_owned())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Ident,
    Number,
    Punct,
}

#[derive(Debug, Clone, Copy)]
struct Tok<'a> {
    kind: Kind,
    text: &'a str,
    start: usize,
    line: u32,
}

impl Tok<'_> {
    fn is(&self, s: &str) -> bool {
        self.text == s
    }
}

fn tokenize(text: &str) -> Vec<Tok<'_>> {
    let b = text.as_bytes();
    let mut toks = Vec::new();
    let mut i = 0;
    let mut line = 1u32;
    while i < b.len() {
        let c = b[i];
        if c == b'\n' {
            line += 1;
            i += 1;
        } else if c.is_ascii_whitespace() {
            i += 1;
        } else if c.is_ascii_alphabetic() || c == b'_' || c >= 0x80 {
            let s = i;
            while i < b.len() && (b[i].is_ascii_alphanumeric() || b[i] == b'_' || b[i] >= 0x80) {
                i += 1;
            }
            toks.push(Tok {
                kind: Kind::Ident,
                text: &text[s..i],
                start: s,
                line,
            });
        } else if c.is_ascii_digit() {
            let s = i;
            while i < b.len() && (b[i].is_ascii_alphanumeric() || b[i] == b'.' || b[i] == b'_') {
                i += 1;
            }
            toks.push(Tok {
                kind: Kind::Number,
                text: &text[s..i],
                start: s,
                line,
            });
        } else {
            let s = i;
            let two = &b[i..(i + 2).min(b.len())];
            let len = if matches!(two, b"::" | b"->" | b"&&" | b"||" | b"==" | b"!=" | b"<=" | b">=") {
                2
            } else {
                1
            };
            i += len;
            toks.push(Tok {
                kind: Kind::Punct,
                text: &text[s..i],
                start: s,
                line,
            });
        }
    }
    toks
}

/// Index of the token matching the opener at `open` (`(`/`)` or `{`/`}`).
fn matching(toks: &[Tok<'_>], open: usize) -> Option<usize> {
    let (o, c) = match toks[open].text {
        "(" => ("(", ")"),
        "{" => ("{", "}"),
        "[" => ("[", "]"),
        _ => return None,
    };
    let mut depth = 0usize;
    for (j, t) in toks.iter().enumerate().skip(open) {
        if t.is(o) {
            depth += 1;
        } else if t.is(c) {
            depth -= 1;
            if depth == 0 {
                return Some(j);
            }
        }
    }
    None
}

// ---------------------------------------------------------------------------
// declaration recognition

struct Header {
    name: String,
    /// Token index of the parameter list's closing paren.
    params_close: usize,
}

const ATTRIBUTE_WORDS: &[&str] = &[
    "__attribute__", "__attribute", "__declspec", "alignas", "__asm__", "asm", "__asm",
];

/// Recognizes `ret-type qualified::name(params) trailing...` in a statement
/// header (the tokens before `{` or `;`).
fn function_header(h: &[Tok<'_>]) -> Option<Header> {
    let first = h.first()?;
    if matches!(first.text, "typedef" | "using" | "friend") {
        return None;
    }
    let mut i = 0;
    while i < h.len() {
        let t = &h[i];
        if t.is("=") {
            // initializer before any parameter list
            let is_operator = i > 0 && h[i - 1].is("operator");
            if !is_operator {
                return None;
            }
        }
        if t.is("<") && i > 0 && h[i - 1].kind == Kind::Ident && !h[i - 1].is("operator") {
            // template argument list: skip to the balancing '>'
            let mut depth = 0i32;
            let mut j = i;
            while j < h.len() {
                match h[j].text {
                    "<" => depth += 1,
                    ">" => {
                        depth -= 1;
                        if depth == 0 {
                            break;
                        }
                    }
                    "(" | ")" | ";" | "{" => break,
                    _ => {}
                }
                j += 1;
            }
            if j < h.len() && h[j].is(">") {
                i = j + 1;
                continue;
            }
        }
        if t.is("(") {
            let close = matching(h, i)?;
            if i == 0 {
                return None;
            }
            let prev = &h[i - 1];
            if prev.kind == Kind::Ident && ATTRIBUTE_WORDS.contains(&prev.text) {
                i = close + 1;
                continue;
            }
            let name = name_before(h, i)?;
            let name_tok_count = name.1;
            let name = name.0;
            let leading = i - name_tok_count;
            let qualified = name.contains("::");
            if leading == 0 && !qualified {
                // no return type: macro invocation or call
                return None;
            }
            if leading > 0 && matches!(h[leading - 1].text, "." | "->" | "=" | ",") {
                return None;
            }
            if !trailing_ok(&h[close + 1..]) {
                return None;
            }
            return Some(Header {
                name,
                params_close: close,
            });
        }
        i += 1;
    }
    None
}

/// Reads the (possibly qualified) name ending just before `paren`. Returns
/// the name and the number of tokens it spans.
fn name_before(h: &[Tok<'_>], paren: usize) -> Option<(String, usize)> {
    let mut j;
    let mut parts: Vec<String> = Vec::new();
    // operator overloads: `operator` followed by punctuation
    let mut k = paren;
    while k > 0 && h[k - 1].kind == Kind::Punct && paren - k < 3 {
        k -= 1;
    }
    if k > 0 && k < paren && h[k - 1].is("operator") {
        let sym: String = h[k..paren].iter().map(|t| t.text).collect();
        parts.push(format!("operator{sym}"));
        j = k - 1;
    } else {
        let t = &h[paren - 1];
        if t.kind != Kind::Ident
            || CONTROL_KEYWORDS.contains(&t.text)
            || TYPE_KEYWORDS.contains(&t.text)
        {
            return None;
        }
        let mut name = t.text.to_string();
        j = paren - 1;
        if j > 0 && h[j - 1].is("~") {
            name.insert(0, '~');
            j -= 1;
        }
        parts.push(name);
    }
    while j >= 2 && h[j - 1].is("::") && h[j - 2].kind == Kind::Ident {
        parts.push(h[j - 2].text.to_string());
        j -= 2;
    }
    if j >= 1 && h[j - 1].is("::") {
        // leading global qualifier
        j -= 1;
    }
    parts.reverse();
    Some((parts.join("::"), paren - j))
}

fn trailing_ok(rest: &[Tok<'_>]) -> bool {
    let Some(first) = rest.first() else {
        return true;
    };
    match first.text {
        "const" | "volatile" | "noexcept" | "override" | "final" | "&" | "&&" | "->" | ":"
        | "throw" | "try" | "mutable" | "__attribute__" | "__attribute" | "=" => true,
        t => first.kind == Kind::Ident && t.chars().all(|c| c.is_ascii_uppercase() || c == '_' || c.is_ascii_digit()),
    }
}

/// Qualified function name declared by a signature such as
/// `int LibRaw::crxDecodePlane(void *p, uint32_t planeNumber)`.
pub fn signature_name(signature: &str) -> Option<String> {
    let clean = scrub(signature);
    let toks = tokenize(&clean);
    let end = toks
        .iter()
        .position(|t| t.is("{") || t.is(";"))
        .unwrap_or(toks.len());
    function_header(&toks[..end]).map(|h| h.name)
}

// ---------------------------------------------------------------------------
// file scan

struct FileScan {
    functions: Vec<FunctionEntry>,
    calls: Vec<(String, String, u32)>,
}

fn header_text(text: &str, h: &[Tok<'_>], end: usize) -> String {
    crate::markup::normalize_ws(&text[h[0].start..end])
}

fn scan_scope(text: &str, toks: &[Tok<'_>], from: usize, to: usize, file: &str, out: &mut FileScan) {
    let mut stmt = from;
    let mut i = from;
    while i < to {
        let t = toks[i];
        match t.text {
            ";" => {
                let h = &toks[stmt..i];
                if let Some(hd) = function_header(h) {
                    out.functions.push(FunctionEntry {
                        name: hd.name,
                        file: file.to_string(),
                        line_start: h[0].line,
                        line_end: t.line,
                        signature: header_text(text, h, t.start),
                        is_definition: false,
                    });
                }
                stmt = i + 1;
                i += 1;
            }
            "(" | "[" => {
                i = matching(toks, i).map_or(to, |m| m + 1);
            }
            "{" => {
                let close = matching(toks, i).unwrap_or(to.saturating_sub(1)).min(to.saturating_sub(1).max(i));
                let h = &toks[stmt..i];
                let transparent = h.first().is_some_and(|f| f.is("namespace"))
                    || (h.len() >= 2 && h[h.len() - 2].is("inline") && h[h.len() - 1].is("namespace"))
                    || (h.first().is_some_and(|f| f.is("extern")) && h.len() <= 3 && !h.iter().any(|x| x.kind == Kind::Ident && !x.is("extern")));
                if transparent {
                    scan_scope(text, toks, i + 1, close, file, out);
                    stmt = close + 1;
                    i = close + 1;
                    continue;
                }
                if let Some(hd) = function_header(h) {
                    let body_end_line = toks.get(close).map_or(t.line, |c| c.line);
                    out.functions.push(FunctionEntry {
                        name: hd.name.clone(),
                        file: file.to_string(),
                        line_start: h[0].line,
                        line_end: body_end_line,
                        signature: header_text(text, h, t.start),
                        is_definition: true,
                    });
                    // a constructor init list can hold calls too
                    collect_calls(&toks[hd.params_close + stmt + 1..close], &hd.name, out);
                    stmt = close + 1;
                    i = close + 1;
                    continue;
                }
                // aggregate body or initializer: the statement continues after it
                i = close + 1;
            }
            "}" => {
                // unbalanced closer at this scope
                stmt = i + 1;
                i += 1;
            }
            _ => i += 1,
        }
    }
}

/// Whether the `>` that follows `toks` closes a template argument list such
/// as `std::vector<int>`, making the next name a declared variable.
fn closes_template_args(toks: &[Tok<'_>]) -> bool {
    let mut depth = 1;
    for (j, t) in toks.iter().enumerate().rev() {
        match t.text {
            ">" => depth += 1,
            "<" => {
                depth -= 1;
                if depth == 0 {
                    return j > 0 && toks[j - 1].kind == Kind::Ident;
                }
            }
            "(" | ")" | ";" | "{" | "}" | "&&" | "||" => return false,
            _ => {}
        }
    }
    false
}

fn collect_calls(body: &[Tok<'_>], caller: &str, out: &mut FileScan) {
    for (k, t) in body.iter().enumerate() {
        if t.kind != Kind::Ident || !body.get(k + 1).is_some_and(|n| n.is("(")) {
            continue;
        }
        if CONTROL_KEYWORDS.contains(&t.text) || TYPE_KEYWORDS.contains(&t.text) {
            continue;
        }
        let prev = k.checked_sub(1).map(|p| body[p]);
        if let Some(p) = prev {
            // `Type name(args)` is a declaration with direct initialization
            if p.kind == Kind::Ident && !CALL_PREFIX_KEYWORDS.contains(&p.text) {
                continue;
            }
            if p.is("~") || (p.is(">") && closes_template_args(&body[..k - 1])) {
                continue;
            }
        }
        let mut callee = t.text.to_string();
        let mut j = k;
        while j >= 2 && body[j - 1].is("::") && body[j - 2].kind == Kind::Ident {
            callee = format!("{}::{}", body[j - 2].text, callee);
            j -= 2;
        }
        if callee != t.text {
            // re-check the token before a qualified name
            if let Some(p) = j.checked_sub(1).map(|p| body[p]) {
                if p.kind == Kind::Ident && !CALL_PREFIX_KEYWORDS.contains(&p.text) {
                    continue;
                }
            }
        }
        out.calls.push((caller.to_string(), callee, t.line));
    }
}

fn scan_file(text: &str, file: &str) -> FileScan {
    let clean = scrub(text);
    let toks = tokenize(&clean);
    let mut out = FileScan {
        functions: Vec::new(),
        calls: Vec::new(),
    };
    scan_scope(&clean, &toks, 0, toks.len(), file, &mut out);
    out
}

fn is_source(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| SOURCE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
}

/// Scans every C/C++ source file under the checkout root.
pub fn build_symbol_index(checkout: &ProjectCheckout) -> Result<SymbolIndex, ToolError> {
    let root = checkout.root();
    let mut files = Vec::new();
    for entry in WalkDir::new(root)
        .sort_by_file_name()
        .into_iter()
        .filter_entry(|e| {
            e.depth() == 0
                || !(e.file_type().is_dir()
                    && (e.file_name() == METADATA_DIR || e.file_name().to_string_lossy().starts_with('.')))
        })
    {
        let entry = entry.map_err(|e| {
            let path = e.path().map(Path::to_path_buf).unwrap_or_else(|| root.to_path_buf());
            ToolError::io(path, e.into())
        })?;
        if entry.file_type().is_file() && is_source(entry.path()) {
            files.push(entry.into_path());
        }
    }
    if files.is_empty() {
        return Err(ToolError::EmptyProject(root.to_path_buf()));
    }

    let mut functions = Vec::new();
    let mut raw_calls = Vec::new();
    for path in &files {
        let bytes = fs::read(path).map_err(|e| ToolError::io(path, e))?;
        let text = String::from_utf8_lossy(&bytes);
        let rel = path
            .strip_prefix(root)
            .unwrap_or(path)
            .to_string_lossy()
            .replace('\\', "/");
        let scan = scan_file(&text, &rel);
        functions.extend(scan.functions);
        raw_calls.extend(scan.calls.into_iter().map(|(caller, callee, line)| (caller, callee, rel.clone(), line)));
    }
    functions.sort_by(|a, b| {
        (&a.name, &a.file, a.line_start, !a.is_definition).cmp(&(&b.name, &b.file, b.line_start, !b.is_definition))
    });
    let mut call_edges: Vec<CallEdge> = raw_calls
        .into_iter()
        .map(|(caller, callee, file, line)| {
            let external = !functions.iter().any(|f| symbol_matches(&callee, &f.name));
            CallEdge {
                caller,
                callee,
                file,
                line,
                external,
            }
        })
        .collect();
    call_edges.sort();
    Ok(SymbolIndex {
        functions,
        call_edges,
    })
}

/// Definition candidates for `function_name` with their full source text,
/// ordered by (file, line).
pub fn function_search(
    index: &SymbolIndex,
    checkout: &ProjectCheckout,
    function_name: &str,
) -> Result<Vec<FunctionMatch>, ToolError> {
    let name = function_name.trim();
    let mut defs: Vec<&FunctionEntry> = index
        .definitions()
        .filter(|f| symbol_matches(name, &f.name))
        .collect();
    if name.is_empty() || defs.is_empty() {
        return Err(ToolError::NotFound(name.to_string()));
    }
    defs.sort_by(|a, b| (&a.file, a.line_start).cmp(&(&b.file, b.line_start)));
    let mut out = Vec::with_capacity(defs.len());
    for d in defs {
        let path = checkout.resolve(&d.file)?;
        let bytes = fs::read(&path).map_err(|e| ToolError::io(&path, e))?;
        let text = String::from_utf8_lossy(&bytes);
        let source_text = text
            .lines()
            .skip(d.line_start.saturating_sub(1) as usize)
            .take((d.line_end + 1).saturating_sub(d.line_start) as usize)
            .collect::<Vec<_>>()
            .join("\n");
        out.push(FunctionMatch {
            signature: d.signature.clone(),
            source_text,
            file: d.file.clone(),
            line_start: d.line_start,
        });
    }
    Ok(out)
}

/// Every direct call site of `function_name`, ordered by (file, line, caller).
pub fn find_callers(index: &SymbolIndex, function_name: &str) -> Vec<CallerRef> {
    let name = function_name.trim();
    let mut out: Vec<CallerRef> = index
        .call_edges
        .iter()
        .filter(|e| symbol_matches(name, &e.callee))
        .map(|e| CallerRef {
            caller: e.caller.clone(),
            file: e.file.clone(),
            line: e.line,
        })
        .collect();
    out.sort_by(|a, b| (&a.file, a.line, &a.caller).cmp(&(&b.file, b.line, &b.caller)));
    out
}

/// Root-level non-test functions: definitions with no incoming call from any
/// other non-test function. Self-recursion does not count as a caller here.
pub fn entry_points(index: &SymbolIndex) -> Vec<String> {
    let mut names: Vec<&str> = index
        .definitions()
        .filter(|f| !is_test_function(&f.name, &f.file))
        .map(|f| f.name.as_str())
        .collect();
    names.sort_unstable();
    names.dedup();
    names
        .into_iter()
        .filter(|name| {
            !index.call_edges.iter().any(|e| {
                symbol_matches(&e.callee, name)
                    && e.caller != *name
                    && !is_test_function(&e.caller, &e.file)
            })
        })
        .map(str::to_string)
        .collect()
}
