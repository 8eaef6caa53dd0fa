//! Report tables in aligned text and CSV.
//!
//! CSV schemas (one header row each):
//! - sets: `set,benchmarks,crashes_without_fc,fp_without_fc,crashes_with_fc,fp_with_fc,pct_diff,coverage_without_fc,coverage_with_fc`
//! - validation: `set,program_error_crashes,filtered,pct_filtered`
//! - satisfaction: `configuration,drivers,avg_constraints,pct_all,pct_at_least_n_minus_1,overall_pct,unknown_flags`
//! - costs: `agent,input,tools,output,total` (dollars)
//!
//! Cells missing for a configuration are left empty.

use serde::{Deserialize, Serialize};

use super::{fp_filter_rate, percent_reduction, CostTable, Micros, SatisfactionSummary, Tenths};
use crate::analyzers::Classification;
use crate::pipeline::TrialState;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfigCounts {
    pub crashes: u64,
    /// Crashes blamed on the driver or judged unreachable.
    pub false_positives: u64,
    pub program_errors: u64,
    /// Program-error crashes the validator judged infeasible.
    pub filtered: u64,
    /// Mean over trials of the best coverage a trial reached.
    pub coverage_pct: Tenths,
}

/// Crash and coverage counts over the trials of one configuration.
pub fn run_counts(trials: &[TrialState]) -> ConfigCounts {
    let mut c = ConfigCounts::default();
    let mut cov_sum = 0.0;
    let mut cov_n = 0usize;
    for t in trials {
        for r in &t.crash_history {
            c.crashes += 1;
            let infeasible = r.verdict.as_ref().is_some_and(|v| !v.feasible);
            match r.crash.classification {
                Some(Classification::FuzzDriverError) => c.false_positives += 1,
                _ => {
                    c.program_errors += 1;
                    if infeasible {
                        c.filtered += 1;
                        c.false_positives += 1;
                    }
                }
            }
        }
        if let Some(best) = t.coverage_history.iter().copied().reduce(f64::max) {
            cov_sum += best;
            cov_n += 1;
        }
    }
    if cov_n > 0 {
        c.coverage_pct = Tenths((cov_sum / cov_n as f64 * 1000.0).round() as i64);
    }
    c
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SetRow {
    pub name: String,
    pub benchmarks: usize,
    pub without_fc: Option<ConfigCounts>,
    pub with_fc: Option<ConfigCounts>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationRow {
    pub name: String,
    pub program_errors: u64,
    pub filtered: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReportInput {
    pub sets: Vec<SetRow>,
    pub validation: Vec<ValidationRow>,
    pub satisfaction: Vec<(String, SatisfactionSummary)>,
    pub costs: Option<CostTable>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Report {
    pub text: String,
    pub sets_csv: String,
    pub validation_csv: String,
    pub satisfaction_csv: String,
    pub costs_csv: String,
}

const SET_HEADER: [&str; 9] = [
    "set",
    "benchmarks",
    "crashes_without_fc",
    "fp_without_fc",
    "crashes_with_fc",
    "fp_with_fc",
    "pct_diff",
    "coverage_without_fc",
    "coverage_with_fc",
];
const VALIDATION_HEADER: [&str; 4] = ["set", "program_error_crashes", "filtered", "pct_filtered"];
const SATISFACTION_HEADER: [&str; 7] = [
    "configuration",
    "drivers",
    "avg_constraints",
    "pct_all",
    "pct_at_least_n_minus_1",
    "overall_pct",
    "unknown_flags",
];
const COST_HEADER: [&str; 5] = ["agent", "input", "tools", "output", "total"];

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

fn set_cells(row: &SetRow) -> Vec<String> {
    let diff = match (row.without_fc, row.with_fc) {
        (Some(a), Some(b)) => percent_reduction(a.crashes, b.crashes).ok(),
        _ => None,
    };
    vec![
        row.name.clone(),
        row.benchmarks.to_string(),
        opt(row.without_fc.map(|c| c.crashes)),
        opt(row.without_fc.map(|c| c.false_positives)),
        opt(row.with_fc.map(|c| c.crashes)),
        opt(row.with_fc.map(|c| c.false_positives)),
        opt(diff),
        opt(row.without_fc.map(|c| c.coverage_pct)),
        opt(row.with_fc.map(|c| c.coverage_pct)),
    ]
}

fn validation_cells(row: &ValidationRow) -> Vec<String> {
    vec![
        row.name.clone(),
        row.program_errors.to_string(),
        row.filtered.to_string(),
        opt(fp_filter_rate(row.program_errors, row.filtered).ok()),
    ]
}

fn satisfaction_cells(label: &str, s: &SatisfactionSummary) -> Vec<String> {
    vec![
        label.to_string(),
        s.drivers.to_string(),
        format!("{:.2}", s.avg_constraints),
        s.pct_all.to_string(),
        s.pct_at_least_n_minus_1.to_string(),
        s.overall_pct.to_string(),
        s.unknown_flags.to_string(),
    ]
}

fn money(m: Micros) -> String {
    m.to_string().trim_start_matches('$').to_string()
}

fn cost_cells(table: &CostTable) -> Vec<Vec<String>> {
    table
        .rows
        .iter()
        .chain(std::iter::once(&table.per_driver))
        .map(|r| {
            vec![
                r.agent.clone(),
                money(r.input_cost),
                money(r.tool_cost),
                money(r.output_cost),
                money(r.total),
            ]
        })
        .collect()
}

/// CSV text with a header row.
pub fn render_csv(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
}

fn aligned(title: &str, header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for r in rows {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.len());
        }
    }
    let line = |cells: Vec<&str>| {
        cells
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c:<w$}"))
            .collect::<Vec<_>>()
            .join("  ")
            .trim_end()
            .to_string()
    };
    let mut out = format!("{title}\n{}\n", line(header.to_vec()));
    for r in rows {
        out.push_str(&line(r.iter().map(String::as_str).collect()));
        out.push('\n');
    }
    out
}

pub fn report_tables(input: &ReportInput) -> Report {
    let sets: Vec<Vec<String>> = input.sets.iter().map(set_cells).collect();
    let validation: Vec<Vec<String>> = input.validation.iter().map(validation_cells).collect();
    let satisfaction: Vec<Vec<String>> = input
        .satisfaction
        .iter()
        .map(|(l, s)| satisfaction_cells(l, s))
        .collect();
    let costs = input.costs.as_ref().map(cost_cells).unwrap_or_default();

    let mut text = aligned("Crashes and coverage (FP = false positives)", &SET_HEADER, &sets);
    text.push('\n');
    text.push_str(&aligned("Crash validation", &VALIDATION_HEADER, &validation));
    text.push('\n');
    text.push_str(&aligned("Constraint satisfaction", &SATISFACTION_HEADER, &satisfaction));
    text.push_str(
        "overall_pct = satisfied constraints / all judged constraints; unknown verdicts count as unsatisfied and are listed in unknown_flags\n",
    );
    text.push('\n');
    let title = match &input.costs {
        Some(t) => format!("Average cost per driver (USD, {} drivers)", t.drivers),
        None => "Average cost per driver (USD)".to_string(),
    };
    text.push_str(&aligned(&title, &COST_HEADER, &costs));

    Report {
        text,
        sets_csv: render_csv(&SET_HEADER, &sets),
        validation_csv: render_csv(&VALIDATION_HEADER, &validation),
        satisfaction_csv: render_csv(&SATISFACTION_HEADER, &satisfaction),
        costs_csv: render_csv(&COST_HEADER, &costs),
    }
}
