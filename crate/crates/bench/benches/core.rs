use criterion::{black_box, criterion_group, criterion_main, Criterion};
use fuzzgate_bench::{fixture, fixture_text};
use fuzzgate_core::analyzers::parse_feasibility_output;
use fuzzgate_core::executor::parse_sanitizer_report;
use fuzzgate_core::metrics::{aggregate_satisfaction, SatisfactionResult};
use fuzzgate_core::toolbox::{build_symbol_index, entry_points, find_callers};
use fuzzgate_core::{Language, ProjectCheckout};

fn index(c: &mut Criterion) {
    let libraw = ProjectCheckout::open("libraw", fixture("projects/libraw_mini"), Language::CPlusPlus).unwrap();
    let flexbuf = ProjectCheckout::open("flatbuffers", fixture("projects/flexbuf_mini"), Language::CPlusPlus).unwrap();
    c.bench_function("index/libraw_mini", |b| b.iter(|| build_symbol_index(black_box(&libraw)).unwrap()));
    c.bench_function("index/flexbuf_mini", |b| b.iter(|| build_symbol_index(black_box(&flexbuf)).unwrap()));

    let idx = build_symbol_index(&flexbuf).unwrap();
    c.bench_function("index/find_callers", |b| b.iter(|| find_callers(black_box(&idx), "GetRoot")));
    c.bench_function("index/entry_points", |b| b.iter(|| entry_points(black_box(&idx))));
}

fn parsers(c: &mut Criterion) {
    let asan = fixture_text("pipeline/sim/asan_getroot.txt");
    let verdict = fixture_text("text/getroot_verdict.txt");
    c.bench_function("parse/sanitizer", |b| b.iter(|| parse_sanitizer_report(black_box(&asan)).unwrap()));
    c.bench_function("parse/feasibility", |b| b.iter(|| parse_feasibility_output(black_box(&verdict)).unwrap()));
}

fn metrics(c: &mut Criterion) {
    let results: Vec<SatisfactionResult> = (0..900)
        .map(|i| {
            let n = 4 + i % 2;
            SatisfactionResult {
                driver_id: format!("d{i}"),
                n_constraints: n,
                satisfied_flags: (0..n).map(|k| (i + k) % 7 != 0).collect(),
                unknown: Vec::new(),
            }
        })
        .collect();
    c.bench_function("metrics/satisfaction_900", |b| b.iter(|| aggregate_satisfaction(black_box(&results)).unwrap()));
}

criterion_group!(benches, index, parsers, metrics);
criterion_main!(benches);
