//! Benchmark definitions: one YAML document per target function.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Deserialize;

use super::PipelineError;
use crate::analyzers::{BenchmarkFunction, SourceLocation};
use crate::executor::{Executor, ExternalBuild, SimulatedProject};
use crate::toolbox::{build_symbol_index, Language, ProjectCheckout, SymbolIndex, ToolError};

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExecutorSpec {
    /// Path of a `simproject.yaml` rules file.
    Simulated(PathBuf),
    External(ExternalBuild),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBenchmark {
    #[serde(default)]
    id: Option<String>,
    project: String,
    #[serde(default)]
    project_dir: Option<PathBuf>,
    function_signature: String,
    source_path: String,
    #[serde(default = "default_language")]
    language: String,
    #[serde(default)]
    simulated: Option<PathBuf>,
    #[serde(default)]
    external: Option<ExternalBuild>,
}

fn default_language() -> String {
    "c".into()
}

/// A benchmark entry with relative paths resolved against its file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BenchmarkSpec {
    pub id: String,
    pub project: String,
    pub project_dir: PathBuf,
    pub function_signature: String,
    pub source_path: SourceLocation,
    pub language: Language,
    pub executor: Option<ExecutorSpec>,
}

fn default_id(project: &str, signature: &str) -> String {
    let name = crate::toolbox::signature_name(signature).unwrap_or_else(|| "target".into());
    let name = name.rsplit("::").next().unwrap_or(&name).to_string();
    format!("{project}-{name}")
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.' { c } else { '_' })
        .collect()
}

/// Parses every document of a benchmark file. `base` resolves relative
/// project and rules paths; a missing `project_dir` defaults to a directory
/// named after the project next to the file.
pub fn parse_benchmarks(text: &str, base: &Path) -> Result<Vec<BenchmarkSpec>, PipelineError> {
    let mut out: Vec<BenchmarkSpec> = Vec::new();
    for (i, doc) in serde_yaml::Deserializer::from_str(text).enumerate() {
        let value = serde_yaml::Value::deserialize(doc)
            .map_err(|e| PipelineError::Config(format!("benchmark document {}: {e}", i + 1)))?;
        if value.is_null() {
            continue;
        }
        let raw: RawBenchmark = serde_yaml::from_value(value)
            .map_err(|e| PipelineError::Config(format!("benchmark document {}: {e}", i + 1)))?;
        let language: Language = raw.language.parse().map_err(PipelineError::Config)?;
        let source_path: SourceLocation = raw.source_path.parse().map_err(PipelineError::Config)?;
        let executor = match (raw.simulated, raw.external) {
            (Some(_), Some(_)) => {
                return Err(PipelineError::Config(format!(
                    "benchmark document {}: give either `simulated` or `external`, not both",
                    i + 1
                )))
            }
            (Some(p), None) => Some(ExecutorSpec::Simulated(base.join(p))),
            (None, Some(e)) => Some(ExecutorSpec::External(e)),
            (None, None) => None,
        };
        let id = raw
            .id
            .unwrap_or_else(|| default_id(&raw.project, &raw.function_signature));
        if out.iter().any(|b| b.id == id) {
            return Err(PipelineError::Config(format!("duplicate benchmark id `{id}`")));
        }
        out.push(BenchmarkSpec {
            project_dir: base.join(raw.project_dir.unwrap_or_else(|| PathBuf::from(&raw.project))),
            id,
            project: raw.project,
            function_signature: raw.function_signature,
            source_path,
            language,
            executor,
        });
    }
    Ok(out)
}

pub fn load_benchmarks(path: &Path) -> Result<Vec<BenchmarkSpec>, PipelineError> {
    let text = fs::read_to_string(path).map_err(|e| PipelineError::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    parse_benchmarks(&text, path.parent().unwrap_or(Path::new(".")))
}

/// A benchmark opened against its checkout and ready to run.
pub struct PreparedBenchmark {
    pub spec: BenchmarkSpec,
    pub checkout: Arc<ProjectCheckout>,
    pub index: Arc<SymbolIndex>,
    pub function: BenchmarkFunction,
}

impl PreparedBenchmark {
    /// Opens the checkout, loads its index (building it when absent) and
    /// locates the target function.
    pub fn open(spec: BenchmarkSpec) -> Result<Self, PipelineError> {
        let checkout = ProjectCheckout::open(&spec.project, &spec.project_dir, spec.language)?;
        let index = match SymbolIndex::load(&checkout) {
            Ok(i) => i,
            Err(ToolError::Io { .. }) => build_symbol_index(&checkout)?,
            Err(e) => return Err(e.into()),
        };
        let function = BenchmarkFunction::locate(
            spec.id.clone(),
            &checkout,
            &index,
            &spec.function_signature,
            Some(&spec.source_path),
        )?;
        Ok(Self {
            spec,
            checkout: Arc::new(checkout),
            index: Arc::new(index),
            function,
        })
    }

    pub fn executor(&self) -> Result<Box<dyn Executor>, PipelineError> {
        match &self.spec.executor {
            Some(ExecutorSpec::Simulated(p)) => Ok(Box::new(SimulatedProject::load(p)?)),
            Some(ExecutorSpec::External(e)) => Ok(Box::new(e.clone())),
            None => Err(PipelineError::Config(format!(
                "benchmark `{}` names no executor (`simulated` or `external`)",
                self.spec.id
            ))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn multi_document() {
        let text = "project: p\nfunction_signature: int f(int x)\nsource_path: src/a.c:3\nsimulated: sim.yaml\n---\nid: second\nproject: q\nproject_dir: ../q\nfunction_signature: void ns::g()\nsource_path: b.cc\nlanguage: c++\nexternal: {build_cmd: make, fuzz_cmd: ./fuzz, coverage_file: cov.txt}\n";
        let b = parse_benchmarks(text, Path::new("/x")).unwrap();
        assert_eq!(b.len(), 2);
        assert_eq!(b[0].id, "p-f");
        assert_eq!(b[0].project_dir, PathBuf::from("/x/p"));
        assert_eq!(b[0].source_path.line, 3);
        assert_eq!(b[0].executor, Some(ExecutorSpec::Simulated("/x/sim.yaml".into())));
        assert_eq!(b[1].id, "second");
        assert_eq!(b[1].language, Language::CPlusPlus);
        assert!(matches!(b[1].executor, Some(ExecutorSpec::External(_))));
    }

    #[test]
    fn rejects_duplicates_and_unknown_fields() {
        let dup = "id: a\nproject: p\nfunction_signature: int f()\nsource_path: a.c\n---\nid: a\nproject: p\nfunction_signature: int g()\nsource_path: a.c\n";
        assert!(parse_benchmarks(dup, Path::new(".")).is_err());
        let extra = "project: p\nfunction_signature: int f()\nsource_path: a.c\ncolour: red\n";
        assert!(parse_benchmarks(extra, Path::new(".")).is_err());
    }
}
