//! Evaluation arithmetic: crash and coverage deltas, false-positive filter
//! rates, constraint satisfaction, repeated-run consistency, prompt-variant
//! comparison and token cost accounting.
//!
//! Percentages are rounded to one decimal from exact integer ratios (half
//! away from zero), so recomputing a published cell never depends on float
//! formatting. Money is integer micro-dollars.

mod consistency;
mod cost;
mod report;
mod satisfaction;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use consistency::{consistency_stats, prompt_variant_compare, ConsistencyStats, VariantComparison};
pub use cost::{
    aggregate_costs, compute_cost, cost_group, cost_overhead, CostGroup, CostRecord, CostTable, Micros,
    PriceTable, ToolPricing,
};
pub use report::{render_csv, report_tables, run_counts, ConfigCounts, Report, ReportInput, SetRow, ValidationRow};
pub use satisfaction::{
    aggregate_satisfaction, constraint_list, parse_judge_output, score_constraint_satisfaction, ConstraintJudge,
    JudgeFlag, LlmJudge, RangeRule, RuleJudge, SatisfactionResult, SatisfactionSummary, SatisfactionRule,
};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricsError {
    #[error("invalid baseline: {0}")]
    InvalidBaseline(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("paired session lists differ in length ({0} vs {1})")]
    PairMismatch(usize, usize),
    #[error("judge failed: {0}")]
    JudgeFailure(String),
    #[error("bad price table: {0}")]
    BadPrices(String),
}

/// A value with exactly one decimal, stored as tenths.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Tenths(pub i64);

impl Tenths {
    /// `num / den` rounded to one decimal.
    pub fn ratio(num: i128, den: i128) -> Self {
        Tenths(round_div(num * 10, den))
    }

    /// `100 * part / whole` rounded to one decimal.
    pub fn percent(part: i128, whole: i128) -> Self {
        Tenths(round_div(part * 1000, whole))
    }

    pub fn as_f64(self) -> f64 {
        self.0 as f64 / 10.0
    }
}

/// Integer division rounding half away from zero. `den` must be non-zero.
pub(crate) fn round_div(num: i128, den: i128) -> i64 {
    assert!(den != 0, "division by zero");
    let neg = (num < 0) != (den < 0);
    let (n, d) = (num.unsigned_abs(), den.unsigned_abs());
    let q = (2 * n + d) / (2 * d);
    let q = i64::try_from(q).expect("ratio fits in i64");
    if neg {
        -q
    } else {
        q
    }
}

impl fmt::Display for Tenths {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "" };
        let a = self.0.unsigned_abs();
        write!(f, "{sign}{}.{}", a / 10, a % 10)
    }
}

/// Relative drop from `before` to `after`, in percent.
pub fn percent_reduction(before: u64, after: u64) -> Result<Tenths, MetricsError> {
    if before == 0 {
        return Err(MetricsError::InvalidBaseline("count before is zero".into()));
    }
    Ok(Tenths::percent(before as i128 - after as i128, before as i128))
}

/// Share of program-error crashes the validator filtered out, in percent.
pub fn fp_filter_rate(program_error_crashes: u64, filtered: u64) -> Result<Tenths, MetricsError> {
    if program_error_crashes == 0 {
        return Err(MetricsError::InvalidBaseline("no program-error crashes".into()));
    }
    if filtered > program_error_crashes {
        return Err(MetricsError::InvalidBaseline(format!(
            "{filtered} filtered out of only {program_error_crashes} crashes"
        )));
    }
    Ok(Tenths::percent(filtered as i128, program_error_crashes as i128))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounding() {
        assert_eq!(round_div(25, 10), 3);
        assert_eq!(round_div(-25, 10), -3);
        assert_eq!(round_div(24, 10), 2);
        assert_eq!(Tenths(-5).to_string(), "-0.5");
        assert_eq!(Tenths(685).to_string(), "68.5");
    }

    #[test]
    fn reductions() {
        assert_eq!(percent_reduction(100, 100).unwrap(), Tenths(0));
        assert_eq!(percent_reduction(10, 11).unwrap(), Tenths(-100));
        assert!(percent_reduction(0, 1).is_err());
        assert_eq!(fp_filter_rate(7, 0).unwrap(), Tenths(0));
        assert!(fp_filter_rate(0, 0).is_err());
        assert!(fp_filter_rate(3, 4).is_err());
    }
}
