//! The agents the pipeline runs, with their shipped prompt templates.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::agent::{AgentSpec, OutputParser, DEFAULT_MAX_TOOL_CALLS};
use crate::toolbox::ToolId;

/// Replaced by the tool budget when a spec is built.
const BUDGET_MARKER: &str = "$MAX_TOOL_CALLS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AgentRole {
    FunctionAnalyzer,
    CrashValidator,
    Prototyper,
    Enhancer,
    CoverageAnalyzer,
    CrashAnalyzer,
    ConstraintJudge,
}

/// Prompt flavour: the detailed one walks the model through the analysis
/// step by step, the simple one only states the task.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PromptVariant {
    #[default]
    Detailed,
    Simple,
}

impl FromStr for PromptVariant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "detailed" => Ok(PromptVariant::Detailed),
            "simple" => Ok(PromptVariant::Simple),
            other => Err(format!("unknown prompt variant `{other}`")),
        }
    }
}

impl AgentRole {
    pub const ALL: [AgentRole; 7] = [
        AgentRole::FunctionAnalyzer,
        AgentRole::CrashValidator,
        AgentRole::Prototyper,
        AgentRole::Enhancer,
        AgentRole::CoverageAnalyzer,
        AgentRole::CrashAnalyzer,
        AgentRole::ConstraintJudge,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AgentRole::FunctionAnalyzer => "function-analyzer",
            AgentRole::CrashValidator => "crash-validator",
            AgentRole::Prototyper => "prototyper",
            AgentRole::Enhancer => "enhancer",
            AgentRole::CoverageAnalyzer => "coverage-analyzer",
            AgentRole::CrashAnalyzer => "crash-analyzer",
            AgentRole::ConstraintJudge => "constraint-judge",
        }
    }

    /// Writers produce driver source.
    pub fn is_writer(self) -> bool {
        matches!(self, AgentRole::Prototyper | AgentRole::Enhancer)
    }

    /// Analyzers interpret an execution result.
    pub fn is_analyzer(self) -> bool {
        matches!(self, AgentRole::CoverageAnalyzer | AgentRole::CrashAnalyzer)
    }

    pub fn tools(self) -> Vec<ToolId> {
        match self {
            AgentRole::FunctionAnalyzer => vec![
                ToolId::CodeSearch,
                ToolId::FunctionSearch,
                ToolId::FindCallers,
            ],
            AgentRole::CrashValidator => ToolId::ALL.to_vec(),
            AgentRole::ConstraintJudge => Vec::new(),
            _ => vec![ToolId::CodeSearch, ToolId::FunctionSearch],
        }
    }

    pub fn parser(self) -> OutputParser {
        match self {
            AgentRole::FunctionAnalyzer => OutputParser::ConstraintReport,
            AgentRole::CrashValidator => OutputParser::Feasibility,
            AgentRole::Prototyper | AgentRole::Enhancer => OutputParser::FuzzDriver,
            AgentRole::CoverageAnalyzer => OutputParser::CoverageAnalysis,
            AgentRole::CrashAnalyzer => OutputParser::CrashAnalysis,
            AgentRole::ConstraintJudge => OutputParser::JudgeFlags,
        }
    }

    /// Raw template text. Only the two new analysis agents ship a simple
    /// variant; the others return their single prompt for both.
    pub fn template(self, variant: PromptVariant) -> &'static str {
        use PromptVariant::*;
        match (self, variant) {
            (AgentRole::FunctionAnalyzer, Detailed) => {
                include_str!("../prompts/function_analyzer.detailed.txt")
            }
            (AgentRole::FunctionAnalyzer, Simple) => {
                include_str!("../prompts/function_analyzer.simple.txt")
            }
            (AgentRole::CrashValidator, Detailed) => {
                include_str!("../prompts/crash_validator.detailed.txt")
            }
            (AgentRole::CrashValidator, Simple) => {
                include_str!("../prompts/crash_validator.simple.txt")
            }
            (AgentRole::Prototyper, _) => include_str!("../prompts/prototyper.txt"),
            (AgentRole::Enhancer, _) => include_str!("../prompts/enhancer.txt"),
            (AgentRole::CoverageAnalyzer, _) => include_str!("../prompts/coverage_analyzer.txt"),
            (AgentRole::CrashAnalyzer, _) => include_str!("../prompts/crash_analyzer.txt"),
            (AgentRole::ConstraintJudge, _) => include_str!("../prompts/constraint_judge.txt"),
        }
    }

    pub fn spec(self) -> AgentSpec {
        self.spec_variant(PromptVariant::Detailed)
    }

    pub fn spec_variant(self, variant: PromptVariant) -> AgentSpec {
        self.spec_with_budget(variant, DEFAULT_MAX_TOOL_CALLS)
    }

    pub fn spec_with_budget(self, variant: PromptVariant, max_tool_calls: usize) -> AgentSpec {
        let prompt = self
            .template(variant)
            .replace(BUDGET_MARKER, &max_tool_calls.to_string());
        let mut spec = AgentSpec::new(self.name(), prompt, self.tools(), self.parser());
        spec.max_tool_calls = max_tool_calls;
        spec
    }
}

impl fmt::Display for AgentRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AgentRole {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        AgentRole::ALL
            .into_iter()
            .find(|r| r.name() == s)
            .ok_or_else(|| format!("unknown agent `{s}`"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::{render_template, unwrapped_placeholders, Bindings};
    use crate::replay::extract_context;

    #[test]
    fn every_template_is_recoverable_from_its_log() {
        for role in AgentRole::ALL {
            for variant in [PromptVariant::Detailed, PromptVariant::Simple] {
                let spec = role.spec_variant(variant);
                assert!(
                    unwrapped_placeholders(&spec.system_prompt).is_empty(),
                    "{role} {variant:?}"
                );
                assert!(!spec.system_prompt.contains(BUDGET_MARKER));
                let bindings: Bindings = spec
                    .placeholders()
                    .into_iter()
                    .map(|p| {
                        let v = format!("value of {p} with a < b and std::vector<int> x;");
                        (p, v)
                    })
                    .collect();
                let prompt = render_template(&spec.system_prompt, &bindings).unwrap();
                let ctx = extract_context(&prompt).unwrap();
                for (k, v) in &bindings {
                    assert_eq!(ctx.get(k), Some(v), "{role} {k}");
                }
            }
        }
    }

    #[test]
    fn names_round_trip() {
        for role in AgentRole::ALL {
            assert_eq!(role.name().parse::<AgentRole>().unwrap(), role);
        }
    }
}
