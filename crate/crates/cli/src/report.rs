//! `fuzzgate report`: report tables over one or more finished runs.
//!
//! Runs sharing a set name are paired: the one without constraints fills
//! the "without FC" columns and the one with constraints the "with FC"
//! columns. Every run with the validator on adds a validation row.

use std::io::Write;
use std::path::{Path, PathBuf};

use fuzzgate_core::analyzers::parse_constraint_report;
use fuzzgate_core::metrics::{
    aggregate_costs, aggregate_satisfaction, compute_cost, report_tables, run_counts, ConstraintJudge, CostRecord,
    PriceTable, Report, ReportInput, RuleJudge, SetRow, ValidationRow,
};
use fuzzgate_core::pipeline::{constraints_path, load_state, RunLayout};
use fuzzgate_core::metrics::score_constraint_satisfaction;
use fuzzgate_core::{SharedRepository, TrialState};

use crate::run::RunSummary;
use crate::{emit, write_file, CliError, ReportArgs};

/// A finished (or interrupted) run read back from disk.
#[derive(Debug, Clone)]
pub struct LoadedRun {
    pub dir: PathBuf,
    pub summary: RunSummary,
    pub states: Vec<TrialState>,
}

/// Reads `run.json` and every trial state file present. Trials of an
/// interrupted run that never wrote a state are simply absent.
pub fn load_run(dir: &Path) -> Result<LoadedRun, CliError> {
    let summary = RunSummary::load(dir)?;
    let results = dir.join("results");
    let mut paths = Vec::new();
    if results.is_dir() {
        for bench in sorted_dirs(&results)? {
            for trial in sorted_dirs(&bench)? {
                let p = trial.join("state.json");
                if p.is_file() {
                    paths.push(p);
                }
            }
        }
    }
    let states = paths
        .iter()
        .map(|p| load_state(p).map_err(CliError::from))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(LoadedRun {
        dir: dir.to_path_buf(),
        summary,
        states,
    })
}

fn sorted_dirs(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let mut out: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| CliError::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    out.sort();
    Ok(out)
}

pub fn load_prices(path: &Path) -> Result<PriceTable, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    PriceTable::from_yaml(&text).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

fn validation_label(s: &RunSummary) -> String {
    format!(
        "{} ({} FC)",
        s.set,
        if s.constraints_enabled { "with" } else { "without" }
    )
}

/// Cost records of every agent session in the runs, the function analyzer
/// included.
pub fn cost_records(runs: &[LoadedRun], prices: &PriceTable) -> Vec<CostRecord> {
    let mut out = Vec::new();
    for r in runs {
        for b in &r.summary.benchmarks {
            if let Some(s) = b.function_analysis.as_ref().and_then(|f| f.session.as_ref()) {
                out.push(compute_cost(&s.agent, &s.usage, prices));
            }
        }
        for t in &r.states {
            for s in &t.sessions {
                out.push(compute_cost(&s.agent, &s.usage, prices));
            }
        }
    }
    out
}

pub fn build_report_input(
    runs: &[LoadedRun],
    prices: Option<&PriceTable>,
    judge: Option<&dyn ConstraintJudge>,
) -> Result<ReportInput, CliError> {
    let mut input = ReportInput::default();
    for r in runs {
        let counts = run_counts(&r.states);
        let n_bench = r.summary.benchmarks.len();
        let row = match input.sets.iter_mut().find(|s| s.name == r.summary.set) {
            Some(row) => row,
            None => {
                input.sets.push(SetRow {
                    name: r.summary.set.clone(),
                    benchmarks: 0,
                    without_fc: None,
                    with_fc: None,
                });
                input.sets.last_mut().expect("just pushed")
            }
        };
        row.benchmarks = row.benchmarks.max(n_bench);
        let slot = if r.summary.constraints_enabled { &mut row.with_fc } else { &mut row.without_fc };
        if slot.is_some() {
            return Err(CliError::input(format!(
                "two runs of set `{}` with constraints {}; give each run its own set name",
                r.summary.set,
                if r.summary.constraints_enabled { "on" } else { "off" }
            )));
        }
        *slot = Some(counts);
        if r.summary.validator_enabled {
            input.validation.push(ValidationRow {
                name: validation_label(&r.summary),
                program_errors: counts.program_errors,
                filtered: counts.filtered,
            });
        }
        if let (Some(judge), true) = (judge, r.summary.constraints_enabled) {
            let repo = SharedRepository::open(RunLayout::new(&r.dir).repository())
                .map_err(|e| CliError::input(e.to_string()))?;
            let mut results = Vec::new();
            for t in &r.states {
                let Some(driver) = &t.driver else { continue };
                let b = &t.benchmark;
                let Some(bytes) = repo.read(&b.id, &constraints_path(b)).map_err(|e| CliError::input(e.to_string()))?
                else {
                    continue;
                };
                let Ok(report) = parse_constraint_report(&String::from_utf8_lossy(&bytes)) else { continue };
                if report.constraints.is_empty() {
                    continue;
                }
                let id = format!("{}/{}", b.id, t.trial_id);
                let scored = score_constraint_satisfaction(&id, driver, &report, judge)
                    .map_err(|e| CliError::input(e.to_string()))?;
                results.push(scored);
            }
            if !results.is_empty() {
                let summary = aggregate_satisfaction(&results).map_err(|e| CliError::input(e.to_string()))?;
                input.satisfaction.push((r.summary.set.clone(), summary));
            }
        }
    }
    if let Some(prices) = prices {
        let drivers = runs
            .iter()
            .flat_map(|r| &r.states)
            .filter(|t| t.driver.is_some())
            .count();
        if drivers > 0 {
            let table = aggregate_costs(&cost_records(runs, prices), drivers)
                .map_err(|e| CliError::input(e.to_string()))?;
            input.costs = Some(table);
        }
    }
    Ok(input)
}

pub fn render_runs(
    dirs: &[PathBuf],
    prices: Option<&PriceTable>,
    judge: Option<&dyn ConstraintJudge>,
) -> Result<Report, CliError> {
    let runs = dirs.iter().map(|d| load_run(d)).collect::<Result<Vec<_>, _>>()?;
    Ok(report_tables(&build_report_input(&runs, prices, judge)?))
}

pub fn write_report(dir: &Path, report: &Report) -> Result<(), CliError> {
    write_file(&dir.join("report.txt"), &report.text)?;
    write_file(&dir.join("sets.csv"), &report.sets_csv)?;
    write_file(&dir.join("validation.csv"), &report.validation_csv)?;
    write_file(&dir.join("satisfaction.csv"), &report.satisfaction_csv)?;
    write_file(&dir.join("costs.csv"), &report.costs_csv)
}

pub fn cmd_report(a: &ReportArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let prices = a.prices.as_deref().map(load_prices).transpose()?;
    let judge = match &a.judge_rules {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
            Some(RuleJudge::from_yaml(&text).map_err(|e| CliError::input(format!("{}: {e}", p.display())))?)
        }
        None => None,
    };
    let report = render_runs(&a.runs, prices.as_ref(), judge.as_ref().map(|j| j as &dyn ConstraintJudge))?;
    if let Some(dir) = &a.out {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        write_report(dir, &report)?;
    }
    emit(out, &report.text)
}
