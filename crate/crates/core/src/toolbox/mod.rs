//! Source-exploration tools the agents call: sandboxed shell search over a
//! project checkout and a locally built symbol index answering definition
//! and caller queries.

mod sandbox;
mod symbols;

use std::fmt;
use std::path::{Component, Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use sandbox::{check_command, code_search, CommandResult};
pub use symbols::{
    build_symbol_index, entry_points, find_callers, function_search, is_test_function,
    signature_name, symbol_matches, CallEdge, CallerRef, FunctionEntry, FunctionMatch, SymbolIndex,
};

/// Directory under a checkout root holding generated metadata.
pub const METADATA_DIR: &str = ".fuzzgate";

#[derive(Debug, Error)]
pub enum ToolError {
    #[error("command not permitted: {0}")]
    DisallowedCommand(String),
    #[error("command exceeded the {0:?} time limit")]
    Timeout(Duration),
    #[error("path escapes the project root: {0}")]
    PathEscape(String),
    #[error("no C/C++ source files found under {0}")]
    EmptyProject(PathBuf),
    #[error("no definition found for `{0}`")]
    NotFound(String),
    #[error("{0} is not a directory")]
    NotADirectory(PathBuf),
    #[error("malformed symbol index {path}: {source}")]
    BadIndex {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl ToolError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        ToolError::Io {
            path: path.into(),
            source,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Language {
    C,
    CPlusPlus,
}

impl FromStr for Language {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "c" => Ok(Language::C),
            "c++" | "cpp" | "cxx" | "cplusplus" => Ok(Language::CPlusPlus),
            other => Err(format!("unsupported language `{other}` (expected c or c++)")),
        }
    }
}

impl fmt::Display for Language {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Language::C => "c",
            Language::CPlusPlus => "c++",
        })
    }
}

/// A project source tree the tools may read. The root is canonicalized on
/// open so containment checks compare real paths.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProjectCheckout {
    project_name: String,
    root: PathBuf,
    language: Language,
}

impl ProjectCheckout {
    pub fn open(
        project_name: impl Into<String>,
        root: impl AsRef<Path>,
        language: Language,
    ) -> Result<Self, ToolError> {
        let root = root.as_ref();
        let canonical = root
            .canonicalize()
            .map_err(|e| ToolError::io(root, e))?;
        if !canonical.is_dir() {
            return Err(ToolError::NotADirectory(canonical));
        }
        Ok(Self {
            project_name: project_name.into(),
            root: canonical,
            language,
        })
    }

    pub fn project_name(&self) -> &str {
        &self.project_name
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn language(&self) -> Language {
        self.language
    }

    pub fn metadata_dir(&self) -> PathBuf {
        self.root.join(METADATA_DIR)
    }

    pub fn index_path(&self) -> PathBuf {
        self.metadata_dir().join("index.json")
    }

    /// Resolves `rel` against the root, rejecting anything that would land
    /// outside it either lexically or through a symlink.
    pub fn resolve(&self, rel: &str) -> Result<PathBuf, ToolError> {
        resolve_under(&self.root, rel)
    }
}

/// Lexically joins `arg` onto `root` and checks containment. Existing paths
/// are additionally canonicalized so symlinks cannot point out of the tree.
pub(crate) fn resolve_under(root: &Path, arg: &str) -> Result<PathBuf, ToolError> {
    if arg.starts_with('~') {
        return Err(ToolError::PathEscape(arg.to_string()));
    }
    let candidate = Path::new(arg);
    let joined = if candidate.is_absolute() {
        candidate.to_path_buf()
    } else {
        root.join(candidate)
    };
    let mut normal = PathBuf::new();
    for comp in joined.components() {
        match comp {
            Component::ParentDir => {
                if !normal.pop() {
                    return Err(ToolError::PathEscape(arg.to_string()));
                }
            }
            Component::CurDir => {}
            other => normal.push(other.as_os_str()),
        }
    }
    if !normal.starts_with(root) {
        return Err(ToolError::PathEscape(arg.to_string()));
    }
    if let Ok(real) = normal.canonicalize() {
        if !real.starts_with(root) {
            return Err(ToolError::PathEscape(arg.to_string()));
        }
    }
    Ok(normal)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ToolLimits {
    pub timeout: Duration,
    pub output_cap_bytes: usize,
}

impl Default for ToolLimits {
    fn default() -> Self {
        Self {
            timeout: Duration::from_secs(30),
            output_cap_bytes: 64 * 1024,
        }
    }
}

/// Tools an agent can be granted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ToolId {
    CodeSearch,
    FunctionSearch,
    FindCallers,
    EntryPoints,
}

impl ToolId {
    pub const ALL: [ToolId; 4] = [
        ToolId::CodeSearch,
        ToolId::FunctionSearch,
        ToolId::FindCallers,
        ToolId::EntryPoints,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ToolId::CodeSearch => "code_search",
            ToolId::FunctionSearch => "function_search",
            ToolId::FindCallers => "find_callers",
            ToolId::EntryPoints => "entry_points",
        }
    }
}

impl FromStr for ToolId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ToolId::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| format!("unknown tool `{s}`"))
    }
}

impl fmt::Display for ToolId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Executes tool calls on behalf of an agent session. Errors are rendered
/// into the returned text so the model can recover.
pub trait ToolHost: Send + Sync {
    fn invoke(&self, tool: ToolId, args: &str) -> String;
}

/// Host with no project attached; every call reports the tool unavailable.
#[derive(Debug, Default, Clone, Copy)]
pub struct NoTools;

impl ToolHost for NoTools {
    fn invoke(&self, tool: ToolId, _args: &str) -> String {
        format!("error: tool `{tool}` is not available in this session")
    }
}

/// The live toolbox over one indexed checkout. Cheap to clone; the index is
/// shared read-only across sessions.
#[derive(Debug, Clone)]
pub struct Toolbox {
    checkout: Arc<ProjectCheckout>,
    index: Arc<SymbolIndex>,
    limits: ToolLimits,
}

impl Toolbox {
    pub fn new(checkout: Arc<ProjectCheckout>, index: Arc<SymbolIndex>, limits: ToolLimits) -> Self {
        Self {
            checkout,
            index,
            limits,
        }
    }

    pub fn checkout(&self) -> &ProjectCheckout {
        &self.checkout
    }

    pub fn index(&self) -> &SymbolIndex {
        &self.index
    }
}

impl ToolHost for Toolbox {
    fn invoke(&self, tool: ToolId, args: &str) -> String {
        let args = args.trim();
        match tool {
            ToolId::CodeSearch => match code_search(&self.checkout, args, &self.limits) {
                Ok(r) => r.render(),
                Err(e) => format!("error: {e}"),
            },
            ToolId::FunctionSearch => {
                match function_search(&self.index, &self.checkout, args) {
                    Ok(found) => found
                        .iter()
                        .map(|m| {
                            format!(
                                "// {}:{}\n// {}\n{}",
                                m.file, m.line_start, m.signature, m.source_text
                            )
                        })
                        .collect::<Vec<_>>()
                        .join("\n\n"),
                    Err(e) => format!("error: {e}"),
                }
            }
            ToolId::FindCallers => {
                let callers = find_callers(&self.index, args);
                if callers.is_empty() {
                    format!("no callers of `{args}` found (root-level candidate)")
                } else {
                    callers
                        .iter()
                        .map(|c| format!("{} {}:{}", c.caller, c.file, c.line))
                        .collect::<Vec<_>>()
                        .join("\n")
                }
            }
            ToolId::EntryPoints => {
                let eps = entry_points(&self.index);
                if eps.is_empty() {
                    "no entry points found".to_string()
                } else {
                    eps.join("\n")
                }
            }
        }
    }
}
