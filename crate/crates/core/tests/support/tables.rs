//! Inputs rebuilt from the published tables, and the values they must
//! reproduce.

use fuzzgate_core::metrics::{
    aggregate_costs, compute_cost, consistency_stats, fp_filter_rate, percent_reduction, ConsistencyStats,
    CostTable, PriceTable, SatisfactionResult, Tenths, ToolPricing,
};
use fuzzgate_core::TokenUsage;
use proptest::prelude::*;

/// (set, crashes without FC, crashes with FC, printed % diff)
pub const CRASH_SETS: [(&str, u64, u64, f64); 3] = [
    ("Set-1", 1858, 1810, 2.6),
    ("Set-2", 1577, 1450, 8.1),
    ("Set-3", 1645, 1575, 4.3),
];

/// (set, program-error crashes, filtered, printed %)
pub const VALIDATION_SETS: [(&str, u64, u64, f64); 3] = [
    ("Set 1", 1092, 626, 57.3),
    ("Set 2", 840, 548, 65.2),
    ("Set 3", 853, 522, 61.2),
];

pub fn crash_reductions() -> Vec<Tenths> {
    CRASH_SETS.iter().map(|(_, a, b, _)| percent_reduction(*a, *b).unwrap()).collect()
}

pub fn filter_rates() -> Vec<Tenths> {
    VALIDATION_SETS.iter().map(|(_, p, f, _)| fp_filter_rate(*p, *f).unwrap()).collect()
}

/// 200 crashes: 130 consistently infeasible, 6 consistently feasible, one
/// where every run failed, the rest split.
pub fn consistency_table() -> ConsistencyStats {
    let mut runs = Vec::new();
    runs.extend(std::iter::repeat(vec![Some(false); 3]).take(130));
    runs.extend(std::iter::repeat(vec![Some(true); 3]).take(6));
    runs.push(vec![None; 3]);
    for i in 0..63 {
        let mixed = match i % 3 {
            0 => vec![Some(true), Some(false), Some(false)],
            1 => vec![Some(false), Some(true), Some(false)],
            _ => vec![Some(false), None, Some(true)],
        };
        runs.push(mixed);
    }
    consistency_stats(&runs).unwrap()
}

/// Function analyzer sessions over 100 drivers whose averages are the
/// published row: $0.004 input, $0.016 tools, $0.004 output.
pub fn function_analyzer_costs() -> CostTable {
    let prices = PriceTable::new(1.25, 10.0, ToolPricing::Input).unwrap();
    // 100 sessions, one per driver
    let usage = TokenUsage {
        input: 3_200,
        tool: 12_800,
        output: 400,
    };
    let records: Vec<_> = (0..100).map(|_| compute_cost("function-analyzer", &usage, &prices)).collect();
    aggregate_costs(&records, 100).unwrap()
}

/// 900 drivers with 4 or 5 constraints (3825 flags): 568 satisfy all, 226
/// miss one, 43 miss two and 63 miss three.
pub fn satisfaction_multiset() -> Vec<SatisfactionResult> {
    let mut out = Vec::new();
    let groups = [(568usize, 0usize), (226, 1), (43, 2), (63, 3)];
    let mut i = 0;
    for (count, missing) in groups {
        for _ in 0..count {
            let n = if i % 4 == 0 { 5 } else { 4 };
            let flags: Vec<bool> = (0..n).map(|k| k >= missing).collect();
            out.push(SatisfactionResult {
                driver_id: format!("d{i}"),
                n_constraints: n,
                satisfied_flags: flags,
                unknown: Vec::new(),
            });
            i += 1;
        }
    }
    out
}

pub fn result_sets() -> impl Strategy<Value = Vec<SatisfactionResult>> {
    prop::collection::vec(prop::collection::vec(any::<bool>(), 1..8), 1..30).prop_map(|drivers| {
        drivers
            .into_iter()
            .enumerate()
            .map(|(i, flags)| SatisfactionResult {
                driver_id: format!("d{i}"),
                n_constraints: flags.len(),
                satisfied_flags: flags,
                unknown: Vec::new(),
            })
            .collect()
    })
}

/// Turns the `pick`-th unsatisfied flag (cyclically) into a satisfied one.
/// Returns false when every flag is already satisfied.
pub fn flip_one(results: &mut [SatisfactionResult], pick: usize) -> bool {
    let unsatisfied: Vec<(usize, usize)> = results
        .iter()
        .enumerate()
        .flat_map(|(d, r)| {
            r.satisfied_flags
                .iter()
                .enumerate()
                .filter(|(_, f)| !**f)
                .map(move |(k, _)| (d, k))
        })
        .collect();
    if unsatisfied.is_empty() {
        return false;
    }
    let (d, k) = unsatisfied[pick % unsatisfied.len()];
    results[d].satisfied_flags[k] = true;
    true
}
