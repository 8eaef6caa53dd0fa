use regex::Regex;
use serde::{Deserialize, Serialize};

use super::{MetricsError, Tenths};
use crate::agent::{run_agent, AgentSpec, Bindings, LlmBackend, SessionContext};
use crate::analyzers::ConstraintReport;
use crate::executor::FuzzDriver;
use crate::markup;
use crate::toolbox::NoTools;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JudgeFlag {
    Satisfied,
    Violated,
    Unknown,
}

impl std::str::FromStr for JudgeFlag {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "satisfied" | "true" | "yes" => Ok(JudgeFlag::Satisfied),
            "violated" | "false" | "no" | "unsatisfied" => Ok(JudgeFlag::Violated),
            "unknown" => Ok(JudgeFlag::Unknown),
            other => Err(format!("unknown verdict `{other}`")),
        }
    }
}

/// Decides, per constraint, whether a driver respects it.
pub trait ConstraintJudge {
    /// One flag per constraint of `report`, in order.
    fn judge(&self, driver: &FuzzDriver, report: &ConstraintReport) -> Result<Vec<JudgeFlag>, MetricsError>;
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SatisfactionResult {
    pub driver_id: String,
    pub n_constraints: usize,
    /// Unknown verdicts are recorded as unsatisfied here.
    pub satisfied_flags: Vec<bool>,
    /// Indices (0-based) of constraints the judge could not decide.
    #[serde(default)]
    pub unknown: Vec<usize>,
}

impl SatisfactionResult {
    pub fn from_flags(driver_id: impl Into<String>, flags: &[JudgeFlag]) -> Self {
        Self {
            driver_id: driver_id.into(),
            n_constraints: flags.len(),
            satisfied_flags: flags.iter().map(|f| *f == JudgeFlag::Satisfied).collect(),
            unknown: flags
                .iter()
                .enumerate()
                .filter(|(_, f)| **f == JudgeFlag::Unknown)
                .map(|(i, _)| i)
                .collect(),
        }
    }

    pub fn satisfied(&self) -> usize {
        self.satisfied_flags.iter().filter(|f| **f).count()
    }
}

pub fn score_constraint_satisfaction(
    driver_id: &str,
    driver: &FuzzDriver,
    report: &ConstraintReport,
    judge: &dyn ConstraintJudge,
) -> Result<SatisfactionResult, MetricsError> {
    if report.constraints.is_empty() {
        return Err(MetricsError::Precondition("report has no constraints".into()));
    }
    let flags = judge.judge(driver, report)?;
    if flags.len() != report.constraints.len() {
        return Err(MetricsError::JudgeFailure(format!(
            "judge returned {} flags for {} constraints",
            flags.len(),
            report.constraints.len()
        )));
    }
    Ok(SatisfactionResult::from_flags(driver_id, &flags))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SatisfactionSummary {
    pub drivers: usize,
    pub pct_all: Tenths,
    pub pct_at_least_n_minus_1: Tenths,
    /// Satisfied flags over all flags.
    pub overall_pct: Tenths,
    pub avg_constraints: f64,
    pub total_flags: usize,
    pub unknown_flags: usize,
}

pub fn aggregate_satisfaction(results: &[SatisfactionResult]) -> Result<SatisfactionSummary, MetricsError> {
    if results.is_empty() {
        return Err(MetricsError::Precondition("no satisfaction results".into()));
    }
    if let Some(r) = results.iter().find(|r| r.satisfied_flags.len() != r.n_constraints) {
        return Err(MetricsError::Precondition(format!(
            "driver {} has {} flags for {} constraints",
            r.driver_id,
            r.satisfied_flags.len(),
            r.n_constraints
        )));
    }
    let n = results.len() as i128;
    let all = results.iter().filter(|r| r.satisfied() == r.n_constraints).count() as i128;
    let near = results
        .iter()
        .filter(|r| r.satisfied() + 1 >= r.n_constraints)
        .count() as i128;
    let total: usize = results.iter().map(|r| r.n_constraints).sum();
    let satisfied: usize = results.iter().map(SatisfactionResult::satisfied).sum();
    Ok(SatisfactionSummary {
        drivers: results.len(),
        pct_all: Tenths::percent(all, n),
        pct_at_least_n_minus_1: Tenths::percent(near, n),
        overall_pct: if total == 0 {
            Tenths(1000)
        } else {
            Tenths::percent(satisfied as i128, total as i128)
        },
        avg_constraints: total as f64 / results.len() as f64,
        total_flags: total,
        unknown_flags: results.iter().map(|r| r.unknown.len()).sum(),
    })
}

/// Requires some `call<...>(lo, hi)` in the driver with its bounds inside
/// `[min, max]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RangeRule {
    pub call: String,
    pub min: i64,
    pub max: i64,
}

/// Check attached to the constraint whose statement contains `constraint`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SatisfactionRule {
    pub constraint: String,
    #[serde(default)]
    pub requires: Vec<String>,
    #[serde(default)]
    pub forbids: Vec<String>,
    #[serde(default)]
    pub range: Option<RangeRule>,
}

fn parse_int(s: &str) -> Option<i64> {
    let s = s.trim().trim_end_matches(|c: char| matches!(c, 'u' | 'U' | 'l' | 'L'));
    if let Some(h) = s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
        i64::from_str_radix(h, 16).ok()
    } else {
        s.parse().ok()
    }
}

impl RangeRule {
    fn holds(&self, source: &str) -> bool {
        let pat = format!(
            r"{}\s*(?:<[^>()]*>)?\s*\(\s*([^,()]+?)\s*,\s*([^,()]+?)\s*\)",
            regex::escape(&self.call)
        );
        let re = Regex::new(&pat).expect("escaped call name");
        let found = re.captures_iter(source).any(|c| match (parse_int(&c[1]), parse_int(&c[2])) {
            (Some(lo), Some(hi)) => lo >= self.min && hi <= self.max && lo <= hi,
            _ => false,
        });
        found
    }
}

impl SatisfactionRule {
    fn evaluate(&self, source: &str) -> JudgeFlag {
        let ok = self.requires.iter().all(|s| source.contains(s.as_str()))
            && !self.forbids.iter().any(|s| source.contains(s.as_str()))
            && self.range.as_ref().map_or(true, |r| r.holds(source));
        if ok {
            JudgeFlag::Satisfied
        } else {
            JudgeFlag::Violated
        }
    }
}

/// Substring and range checks for fixture constraints. Constraints without
/// a rule are judged unknown.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleJudge {
    pub rules: Vec<SatisfactionRule>,
}

impl RuleJudge {
    pub fn new(rules: Vec<SatisfactionRule>) -> Self {
        Self { rules }
    }

    pub fn from_yaml(text: &str) -> Result<Self, MetricsError> {
        serde_yaml::from_str(text).map_err(|e| MetricsError::JudgeFailure(format!("bad rule file: {e}")))
    }
}

impl ConstraintJudge for RuleJudge {
    fn judge(&self, driver: &FuzzDriver, report: &ConstraintReport) -> Result<Vec<JudgeFlag>, MetricsError> {
        Ok(report
            .constraints
            .iter()
            .map(|c| {
                self.rules
                    .iter()
                    .find(|r| c.statement.contains(r.constraint.as_str()))
                    .map_or(JudgeFlag::Unknown, |r| r.evaluate(&driver.source))
            })
            .collect())
    }
}

/// `(index, flag)` pairs from `<verdict index="N">...</verdict>` sections.
pub fn parse_judge_output(text: &str) -> Result<Vec<(usize, JudgeFlag)>, String> {
    let els = markup::find_all(text, "verdict").map_err(|e| e.to_string())?;
    if els.is_empty() {
        return Err("no <verdict> sections".into());
    }
    let mut out: Vec<(usize, JudgeFlag)> = Vec::with_capacity(els.len());
    for el in els {
        let idx: usize = el
            .attr("index")
            .ok_or("<verdict> without an index attribute")?
            .trim()
            .parse()
            .map_err(|_| "verdict index is not a number".to_string())?;
        if idx == 0 {
            return Err("verdict indices start at 1".into());
        }
        if out.iter().any(|(i, _)| *i == idx) {
            return Err(format!("verdict {idx} given twice"));
        }
        out.push((idx, el.content.parse()?));
    }
    Ok(out)
}

/// Numbered constraint list as bound into the judge prompt.
pub fn constraint_list(report: &ConstraintReport) -> String {
    report
        .constraints
        .iter()
        .enumerate()
        .map(|(i, c)| format!("{}. {}", i + 1, c.statement))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Asks the constraint-judge agent. Constraints it leaves out are unknown.
pub struct LlmJudge<'a> {
    pub spec: AgentSpec,
    pub backend: &'a dyn LlmBackend,
    pub context: SessionContext,
}

impl ConstraintJudge for LlmJudge<'_> {
    fn judge(&self, driver: &FuzzDriver, report: &ConstraintReport) -> Result<Vec<JudgeFlag>, MetricsError> {
        let bindings: Bindings = [
            ("fuzz_driver".to_string(), driver.source.clone()),
            ("constraint_list".to_string(), constraint_list(report)),
        ]
        .into_iter()
        .collect();
        let session = run_agent(&self.spec, &bindings, self.backend, &NoTools, &self.context)
            .map_err(|e| MetricsError::JudgeFailure(e.to_string()))?;
        if !session.is_completed() {
            return Err(MetricsError::JudgeFailure(format!("judge ended with {}", session.outcome)));
        }
        let pairs = parse_judge_output(&session.final_output).map_err(MetricsError::JudgeFailure)?;
        let mut flags = vec![JudgeFlag::Unknown; report.constraints.len()];
        for (idx, flag) in pairs {
            if let Some(slot) = flags.get_mut(idx - 1) {
                *slot = flag;
            }
        }
        Ok(flags)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analyzers::{ConstraintCategory, FunctionConstraint};

    fn report(statements: &[&str]) -> ConstraintReport {
        ConstraintReport {
            target: "t".into(),
            description: "d".into(),
            constraints: statements
                .iter()
                .map(|s| FunctionConstraint {
                    category: ConstraintCategory::VariableConstraint,
                    statement: s.to_string(),
                    rationale: String::new(),
                    referenced_symbols: vec![],
                })
                .collect(),
        }
    }

    fn r(id: &str, flags: &[bool]) -> SatisfactionResult {
        SatisfactionResult {
            driver_id: id.into(),
            n_constraints: flags.len(),
            satisfied_flags: flags.to_vec(),
            unknown: vec![],
        }
    }

    #[test]
    fn hand_arithmetic() {
        let s = aggregate_satisfaction(&[r("a", &[true, true]), r("b", &[true, false]), r("c", &[false, false])])
            .unwrap();
        assert_eq!(s.pct_all, Tenths(333));
        assert_eq!(s.pct_at_least_n_minus_1, Tenths(667));
        assert_eq!(s.overall_pct, Tenths(500));
        assert_eq!(s.avg_constraints, 2.0);
        let s = aggregate_satisfaction(&[r("a", &[true]), r("b", &[true, true])]).unwrap();
        assert_eq!((s.pct_all, s.pct_at_least_n_minus_1, s.overall_pct), (Tenths(1000), Tenths(1000), Tenths(1000)));
        assert!(aggregate_satisfaction(&[]).is_err());
    }

    #[test]
    fn range_rule() {
        let judge = RuleJudge::new(vec![
            SatisfactionRule {
                constraint: "planeNumber".into(),
                range: Some(RangeRule {
                    call: "ConsumeIntegralInRange".into(),
                    min: 0,
                    max: 3,
                }),
                ..Default::default()
            },
            SatisfactionRule {
                constraint: "crxSetupImageData".into(),
                requires: vec!["crxSetupImageData(".into()],
                ..Default::default()
            },
        ]);
        let rep = report(&[
            "planeNumber must be less than 'nPlanes' (=4 in fixture)",
            "crxSetupImageData must be called before decoding",
            "something else",
        ]);
        let good = FuzzDriver::new("uint32_t p = fdp.ConsumeIntegralInRange<uint32_t>(0, 3);", 1);
        let bad = FuzzDriver::new("uint32_t p = fdp.ConsumeIntegralInRange<uint32_t>(0, 7);", 1);
        let res = score_constraint_satisfaction("g", &good, &rep, &judge).unwrap();
        assert_eq!(res.satisfied_flags, vec![true, false, false]);
        assert_eq!(res.unknown, vec![2]);
        let res = score_constraint_satisfaction("b", &bad, &rep, &judge).unwrap();
        assert_eq!(res.satisfied_flags[0], false);
        assert!(score_constraint_satisfaction("x", &good, &report(&[]), &judge).is_err());
    }

    #[test]
    fn judge_output() {
        let v = parse_judge_output(r#"<verdict index="1">satisfied</verdict><verdict index="2"> Violated </verdict>"#)
            .unwrap();
        assert_eq!(v, vec![(1, JudgeFlag::Satisfied), (2, JudgeFlag::Violated)]);
        assert!(parse_judge_output("nothing").is_err());
        assert!(parse_judge_output(r#"<verdict index="0">satisfied</verdict>"#).is_err());
        assert!(parse_judge_output(r#"<verdict>satisfied</verdict>"#).is_err());
    }
}
