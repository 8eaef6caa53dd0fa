use serde::{Deserialize, Serialize};

use super::MalformedOutput;
use crate::markup;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeasibilityVerdict {
    pub feasible: bool,
    pub analysis: String,
    #[serde(default)]
    pub source_code_evidence: String,
    #[serde(default)]
    pub recommendations: String,
}

fn section(text: &str, tag: &str) -> Result<Option<String>, MalformedOutput> {
    markup::find_first(text, tag)
        .map(|e| e.map(|e| e.content.trim().to_string()))
        .map_err(|e| MalformedOutput(e.to_string()))
}

/// Reads the `<feasible>`, `<analysis>`, `<source_code_evidence>` and
/// `<recommendations>` sections. An infeasible verdict must carry
/// recommendations since they drive the next driver revision.
pub fn parse_feasibility_output(text: &str) -> Result<FeasibilityVerdict, MalformedOutput> {
    let raw = section(text, "feasible")?
        .ok_or_else(|| MalformedOutput("missing <feasible> section".into()))?;
    let feasible = match raw.to_ascii_lowercase().as_str() {
        "true" => true,
        "false" => false,
        _ => {
            return Err(MalformedOutput(format!(
                "<feasible> must be True or False, got `{raw}`"
            )))
        }
    };
    let analysis = section(text, "analysis")?
        .filter(|a| !a.is_empty())
        .ok_or_else(|| MalformedOutput("missing or empty <analysis> section".into()))?;
    let source_code_evidence = section(text, "source_code_evidence")?.unwrap_or_default();
    let recommendations = section(text, "recommendations")?.unwrap_or_default();
    if !feasible && recommendations.is_empty() {
        return Err(MalformedOutput(
            "an infeasible verdict needs non-empty <recommendations>".into(),
        ));
    }
    Ok(FeasibilityVerdict {
        feasible,
        analysis,
        source_code_evidence,
        recommendations,
    })
}

pub fn serialize_verdict(v: &FeasibilityVerdict) -> String {
    format!(
        "<feasible>{}</feasible>\n<analysis>\n{}\n</analysis>\n<source_code_evidence>\n{}\n</source_code_evidence>\n<recommendations>\n{}\n</recommendations>\n",
        if v.feasible { "True" } else { "False" },
        v.analysis,
        v.source_code_evidence,
        v.recommendations
    )
}
