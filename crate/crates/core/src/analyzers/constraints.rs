use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::MalformedOutput;
use crate::markup::{self, normalize_ws};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ConstraintCategory {
    InputConstruction,
    VariableConstraint,
    InputRelationship,
    SetupTeardown,
}

impl ConstraintCategory {
    pub const ALL: [ConstraintCategory; 4] = [
        ConstraintCategory::InputConstruction,
        ConstraintCategory::VariableConstraint,
        ConstraintCategory::InputRelationship,
        ConstraintCategory::SetupTeardown,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ConstraintCategory::InputConstruction => "InputConstruction",
            ConstraintCategory::VariableConstraint => "VariableConstraint",
            ConstraintCategory::InputRelationship => "InputRelationship",
            ConstraintCategory::SetupTeardown => "SetupTeardown",
        }
    }
}

impl fmt::Display for ConstraintCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Case-insensitive; punctuation and spacing are ignored, so
/// `setup_teardown`, `Setup and teardown` and `SetupTeardown` are the same.
impl FromStr for ConstraintCategory {
    type Err = MalformedOutput;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key: String = s
            .chars()
            .filter(char::is_ascii_alphanumeric)
            .map(|c| c.to_ascii_lowercase())
            .collect();
        let cat = match key.as_str() {
            "inputconstruction" | "inputconstructionmethod" | "inputconstructionmethods" => {
                ConstraintCategory::InputConstruction
            }
            "variableconstraint" | "variableconstraints" => ConstraintCategory::VariableConstraint,
            "inputrelationship" | "inputrelationships" => ConstraintCategory::InputRelationship,
            "setupteardown"
            | "setupandteardown"
            | "setupteardownfunction"
            | "setupteardownfunctions"
            | "setupandteardownfunction"
            | "setupandteardownfunctions" => ConstraintCategory::SetupTeardown,
            _ => return Err(MalformedOutput(format!("unknown constraint category `{s}`"))),
        };
        Ok(cat)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunctionConstraint {
    pub category: ConstraintCategory,
    pub statement: String,
    #[serde(default)]
    pub rationale: String,
    #[serde(default)]
    pub referenced_symbols: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstraintReport {
    /// Benchmark id of the analyzed function; empty for a bare parse.
    #[serde(default)]
    pub target: String,
    pub description: String,
    pub constraints: Vec<FunctionConstraint>,
}

impl ConstraintReport {
    pub fn statements(&self) -> impl Iterator<Item = &str> {
        self.constraints.iter().map(|c| c.statement.as_str())
    }

    pub fn count(&self, category: ConstraintCategory) -> usize {
        self.constraints.iter().filter(|c| c.category == category).count()
    }
}

fn section<'a>(text: &'a str, tag: &str) -> Result<Option<&'a str>, MalformedOutput> {
    markup::find_first(text, tag)
        .map(|e| e.map(|e| e.content))
        .map_err(|e| MalformedOutput(e.to_string()))
}

/// Parses `<description>` plus repeated `<constraint category="...">`
/// sections. A constraint holds `<statement>`, optional `<rationale>` and
/// optional comma-separated `<symbols>`; a constraint with no child sections
/// is read as a bare statement. Text is whitespace-normalized and repeated
/// (category, statement) pairs are merged.
pub fn parse_constraint_report(text: &str) -> Result<ConstraintReport, MalformedOutput> {
    if text.trim().is_empty() {
        return Err(MalformedOutput("empty output".into()));
    }
    let description = section(text, "description")?
        .map(normalize_ws)
        .ok_or_else(|| MalformedOutput("missing <description> section".into()))?;
    if description.is_empty() {
        return Err(MalformedOutput("empty <description> section".into()));
    }
    let elements =
        markup::find_all(text, "constraint").map_err(|e| MalformedOutput(e.to_string()))?;
    let mut constraints: Vec<FunctionConstraint> = Vec::new();
    for el in elements {
        let category: ConstraintCategory = el
            .attr("category")
            .ok_or_else(|| MalformedOutput("constraint without a category attribute".into()))?
            .parse()?;
        let body = el.content;
        let statement = match section(body, "statement")? {
            Some(s) => normalize_ws(s),
            None if markup::top_level(body).map(|v| v.is_empty()).unwrap_or(false) => {
                normalize_ws(body)
            }
            None => return Err(MalformedOutput("constraint without a <statement>".into())),
        };
        if statement.is_empty() {
            return Err(MalformedOutput("empty constraint statement".into()));
        }
        let rationale = section(body, "rationale")?.map(normalize_ws).unwrap_or_default();
        let referenced_symbols = section(body, "symbols")?
            .map(|s| {
                s.split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(str::to_string)
                    .collect()
            })
            .unwrap_or_default();
        if constraints
            .iter()
            .any(|c| c.category == category && c.statement == statement)
        {
            continue;
        }
        constraints.push(FunctionConstraint {
            category,
            statement,
            rationale,
            referenced_symbols,
        });
    }
    Ok(ConstraintReport {
        target: String::new(),
        description,
        constraints,
    })
}

/// Canonical tagged form; parsing it yields the same report.
pub fn serialize_constraint_report(report: &ConstraintReport) -> String {
    let mut out = format!("<description>\n{}\n</description>\n", report.description);
    for c in &report.constraints {
        out.push_str(&format!(
            "<constraint category=\"{}\">\n<statement>{}</statement>\n",
            c.category, c.statement
        ));
        if !c.rationale.is_empty() {
            out.push_str(&format!("<rationale>{}</rationale>\n", c.rationale));
        }
        if !c.referenced_symbols.is_empty() {
            out.push_str(&format!("<symbols>{}</symbols>\n", c.referenced_symbols.join(", ")));
        }
        out.push_str("</constraint>\n");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO: &str = r#"
<description>Decodes one plane
  of a CRX image.</description>
<constraint category="VariableConstraint">
  <statement>The first argument must be a valid pointer to a 'CrxImage' structure.</statement>
  <rationale>It is cast and dereferenced.</rationale>
  <symbols>p, CrxImage</symbols>
</constraint>
<constraint category="setup_teardown">crxSetupImageData must run first.</constraint>
"#;

    #[test]
    fn parses_two() {
        let r = parse_constraint_report(TWO).unwrap();
        assert_eq!(r.description, "Decodes one plane of a CRX image.");
        assert_eq!(r.constraints.len(), 2);
        assert_eq!(r.constraints[0].referenced_symbols, vec!["p", "CrxImage"]);
        assert_eq!(r.constraints[1].category, ConstraintCategory::SetupTeardown);
        assert_eq!(r.constraints[1].statement, "crxSetupImageData must run first.");
    }

    #[test]
    fn rejects_bad_input() {
        assert!(parse_constraint_report("").is_err());
        assert!(parse_constraint_report("<constraint category=\"SetupTeardown\">x</constraint>").is_err());
        assert!(parse_constraint_report(
            "<description>d</description><constraint category=\"Timing\">x</constraint>"
        )
        .is_err());
        assert!(parse_constraint_report("<description>d</description><constraint category=\"SetupTeardown\">x").is_err());
        assert!(parse_constraint_report("<description>d").is_err());
    }

    #[test]
    fn dedup_and_round_trip() {
        let text = "<description>d</description>\
            <constraint category=\"InputRelationship\"><statement>a  b</statement></constraint>\
            <constraint category=\"inputrelationship\"><statement>a b</statement></constraint>";
        let r = parse_constraint_report(text).unwrap();
        assert_eq!(r.constraints.len(), 1);
        let again = parse_constraint_report(&serialize_constraint_report(&r)).unwrap();
        assert_eq!(again, r);
    }

    #[test]
    fn category_spellings() {
        for s in ["SetupTeardown", "setup_teardown", "SETUP-TEARDOWN", "Setup and teardown functions"] {
            assert_eq!(s.parse::<ConstraintCategory>().unwrap(), ConstraintCategory::SetupTeardown);
        }
        assert!("Teardown".parse::<ConstraintCategory>().is_err());
    }
}
