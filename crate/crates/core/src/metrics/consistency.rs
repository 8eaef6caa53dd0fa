use serde::{Deserialize, Serialize};

use super::{MetricsError, Tenths};
use crate::agent::{record_usage, AgentSession};
use crate::analyzers::parse_feasibility_output;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConsistencyStats {
    pub crashes: usize,
    pub consistent: usize,
    pub consistent_pct: Tenths,
    /// Consistently judged infeasible.
    pub consistent_fp: usize,
    pub consistent_fp_pct: Tenths,
    /// Consistently judged feasible.
    pub consistent_tp: usize,
    pub consistent_tp_pct: Tenths,
    /// Consistent crashes that are neither: every run failed to produce a
    /// verdict. Reported rather than folded into either side.
    pub remainder: usize,
}

/// Agreement of repeated validator runs. Each inner list holds one crash's
/// verdicts; `None` marks a run that produced no verdict. A crash is
/// consistent when all of its entries are equal.
pub fn consistency_stats(runs_per_crash: &[Vec<Option<bool>>]) -> Result<ConsistencyStats, MetricsError> {
    if runs_per_crash.is_empty() {
        return Err(MetricsError::Precondition("no crashes".into()));
    }
    if let Some(i) = runs_per_crash.iter().position(|r| r.len() < 2) {
        return Err(MetricsError::Precondition(format!(
            "crash {i} has fewer than two runs"
        )));
    }
    let (mut fp, mut tp, mut rest) = (0, 0, 0);
    for runs in runs_per_crash {
        if runs.iter().all(|v| *v == runs[0]) {
            match runs[0] {
                Some(false) => fp += 1,
                Some(true) => tp += 1,
                None => rest += 1,
            }
        }
    }
    let n = runs_per_crash.len();
    let consistent = fp + tp + rest;
    let pct = |k: usize| Tenths::percent(k as i128, n as i128);
    Ok(ConsistencyStats {
        crashes: n,
        consistent,
        consistent_pct: pct(consistent),
        consistent_fp: fp,
        consistent_fp_pct: pct(fp),
        consistent_tp: tp,
        consistent_tp_pct: pct(tp),
        remainder: rest,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantComparison {
    pub pairs: usize,
    /// Pairs whose feasibility verdicts differ (a missing verdict differs
    /// from any present one).
    pub divergent: usize,
    pub divergence_pct: Tenths,
    pub avg_output_tokens_a: f64,
    pub avg_output_tokens_b: f64,
    pub avg_tool_calls_a: f64,
    pub avg_tool_calls_b: f64,
}

fn verdict(s: &AgentSession) -> Option<bool> {
    s.is_completed()
        .then(|| parse_feasibility_output(&s.final_output).ok().map(|v| v.feasible))
        .flatten()
}

fn mean(values: impl Iterator<Item = u64>, n: usize) -> f64 {
    values.sum::<u64>() as f64 / n as f64
}

/// Compares validator sessions run with two prompt variants on the same
/// crashes; `sessions_a[i]` and `sessions_b[i]` must concern the same crash.
pub fn prompt_variant_compare(
    sessions_a: &[AgentSession],
    sessions_b: &[AgentSession],
) -> Result<VariantComparison, MetricsError> {
    if sessions_a.len() != sessions_b.len() {
        return Err(MetricsError::PairMismatch(sessions_a.len(), sessions_b.len()));
    }
    if sessions_a.is_empty() {
        return Err(MetricsError::Precondition("no session pairs".into()));
    }
    let n = sessions_a.len();
    let divergent = sessions_a
        .iter()
        .zip(sessions_b)
        .filter(|(a, b)| verdict(a) != verdict(b))
        .count();
    Ok(VariantComparison {
        pairs: n,
        divergent,
        divergence_pct: Tenths::percent(divergent as i128, n as i128),
        avg_output_tokens_a: mean(sessions_a.iter().map(|s| record_usage(s).output), n),
        avg_output_tokens_b: mean(sessions_b.iter().map(|s| record_usage(s).output), n),
        avg_tool_calls_a: mean(sessions_a.iter().map(|s| s.tool_calls() as u64), n),
        avg_tool_calls_b: mean(sessions_b.iter().map(|s| s.tool_calls() as u64), n),
    })
}
