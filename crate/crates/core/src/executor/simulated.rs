use std::fs;
use std::path::{Path, PathBuf};
use std::thread;
use std::time::Duration;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::{parse_sanitizer_report, precheck, ExecutionResult, Executor, ExecutorError, FuzzDriver};

/// Conditions on the driver source; all given conditions must hold. An
/// empty predicate matches every driver.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Predicate {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contains: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub not_contains: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regex: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub all_of: Vec<Predicate>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub any_of: Vec<Predicate>,
}

impl Predicate {
    fn is_empty(&self) -> bool {
        *self == Predicate::default()
    }

    fn compile(&self) -> Result<CompiledPredicate, ExecutorError> {
        Ok(CompiledPredicate {
            contains: self.contains.clone(),
            not_contains: self.not_contains.clone(),
            regex: self
                .regex
                .as_deref()
                .map(Regex::new)
                .transpose()
                .map_err(|e| ExecutorError::Config(format!("bad rule regex: {e}")))?,
            all_of: self.all_of.iter().map(Predicate::compile).collect::<Result<_, _>>()?,
            any_of: self.any_of.iter().map(Predicate::compile).collect::<Result<_, _>>()?,
        })
    }
}

#[derive(Debug, Clone)]
struct CompiledPredicate {
    contains: Option<String>,
    not_contains: Option<String>,
    regex: Option<Regex>,
    all_of: Vec<CompiledPredicate>,
    any_of: Vec<CompiledPredicate>,
}

impl CompiledPredicate {
    fn matches(&self, src: &str) -> bool {
        self.contains.as_deref().map_or(true, |s| src.contains(s))
            && self.not_contains.as_deref().map_or(true, |s| !src.contains(s))
            && self.regex.as_ref().map_or(true, |r| r.is_match(src))
            && self.all_of.iter().all(|p| p.matches(src))
            && (self.any_of.is_empty() || self.any_of.iter().any(|p| p.matches(src)))
    }
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimOutcome {
    #[serde(default = "default_true")]
    pub built: bool,
    #[serde(default)]
    pub build_log: String,
    #[serde(default)]
    pub coverage: f64,
    /// Sanitizer output to report as a crash.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub crash_report: Option<String>,
    /// Same, read from a file relative to the rules file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub crash_report_file: Option<PathBuf>,
    #[serde(default)]
    pub delay_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimRule {
    #[serde(default)]
    pub name: String,
    /// Omitted for the default rule.
    #[serde(default, rename = "match", skip_serializing_if = "Option::is_none")]
    pub predicate: Option<Predicate>,
    pub outcome: SimOutcome,
}

#[derive(Debug, Clone, Deserialize)]
struct RulesFile {
    rules: Vec<SimRule>,
}

#[derive(Debug, Clone)]
struct CompiledRule {
    name: String,
    predicate: Option<CompiledPredicate>,
    outcome: SimOutcome,
    crash_text: Option<String>,
}

/// Deterministic executor: the first rule whose predicate matches the
/// driver source decides the result.
#[derive(Debug, Clone)]
pub struct SimulatedProject {
    rules: Vec<CompiledRule>,
}

impl SimulatedProject {
    pub fn new(rules: Vec<SimRule>, base_dir: &Path) -> Result<Self, ExecutorError> {
        if !rules
            .iter()
            .any(|r| r.predicate.as_ref().map_or(true, Predicate::is_empty))
        {
            return Err(ExecutorError::Config(
                "simulated project needs a default rule (one without `match`)".into(),
            ));
        }
        let mut compiled = Vec::with_capacity(rules.len());
        for rule in rules {
            let o = &rule.outcome;
            if !(0.0..=1.0).contains(&o.coverage) {
                return Err(ExecutorError::Config(format!(
                    "rule `{}`: coverage {} is outside [0, 1]",
                    rule.name, o.coverage
                )));
            }
            let crash_text = match (&o.crash_report, &o.crash_report_file) {
                (Some(t), _) => Some(t.clone()),
                (None, Some(f)) => {
                    let p = base_dir.join(f);
                    Some(fs::read_to_string(&p).map_err(|e| ExecutorError::io(&p, e))?)
                }
                (None, None) => None,
            };
            if let Some(t) = &crash_text {
                parse_sanitizer_report(t).map_err(|_| {
                    ExecutorError::Config(format!(
                        "rule `{}`: crash report has no sanitizer ERROR line",
                        rule.name
                    ))
                })?;
            }
            compiled.push(CompiledRule {
                predicate: rule.predicate.as_ref().map(Predicate::compile).transpose()?,
                name: rule.name,
                outcome: rule.outcome,
                crash_text,
            });
        }
        Ok(Self { rules: compiled })
    }

    pub fn from_yaml(text: &str, base_dir: &Path) -> Result<Self, ExecutorError> {
        let file: RulesFile = serde_yaml::from_str(text)
            .map_err(|e| ExecutorError::Config(format!("bad rules file: {e}")))?;
        Self::new(file.rules, base_dir)
    }

    pub fn load(path: &Path) -> Result<Self, ExecutorError> {
        let text = fs::read_to_string(path).map_err(|e| ExecutorError::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_yaml(&text, base)
    }

    /// Name of the rule that decides `source`.
    pub fn matching_rule(&self, source: &str) -> &str {
        &self.select(source).name
    }

    fn select(&self, source: &str) -> &CompiledRule {
        self.rules
            .iter()
            .find(|r| r.predicate.as_ref().map_or(true, |p| p.matches(source)))
            .expect("a default rule exists")
    }
}

impl Executor for SimulatedProject {
    fn execute(
        &self,
        driver: &FuzzDriver,
        duration_s: f64,
        _work_dir: &Path,
    ) -> Result<ExecutionResult, ExecutorError> {
        precheck(driver)?;
        let rule = self.select(&driver.source);
        if rule.outcome.delay_ms > 0 {
            thread::sleep(Duration::from_millis(rule.outcome.delay_ms));
        }
        if !rule.outcome.built {
            let log = if rule.outcome.build_log.is_empty() {
                format!("simulated build failure (rule `{}`)", rule.name)
            } else {
                rule.outcome.build_log.clone()
            };
            return Err(ExecutorError::BuildFailure(log));
        }
        let crash = rule
            .crash_text
            .as_deref()
            .map(parse_sanitizer_report)
            .transpose()?;
        Ok(ExecutionResult {
            built: true,
            crashed: crash.is_some(),
            crash,
            coverage: rule.outcome.coverage,
            duration_s,
        })
    }
}
