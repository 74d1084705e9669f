use std::collections::BTreeMap;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use fusekit::metrics::evaluate_with;
use fusekit::retrievers::{dense_search, run_from_queries, Similarity};
use fusekit::sweep::{exhaustive_best_subset, SearchOptions};
use fusekit::synth::{make_synthetic, QualityProfile};
use fusekit::{Execution, Gain, Metric};

const MODES: [(&str, Execution); 2] = [
    ("sequential", Execution::Sequential),
    ("parallel", Execution::Parallel),
];

fn subset_search(c: &mut Criterion) {
    let data = make_synthetic(1, 2000, 60, 10, QualityProfile::Mixed).unwrap();
    let mut group = c.benchmark_group("exhaustive_subset_10");
    group.sample_size(10);
    for (name, exec) in MODES {
        let opts = SearchOptions {
            exec,
            ..SearchOptions::default()
        };
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| {
                exhaustive_best_subset(&data.runs, &data.qrels, Metric::ndcg(10), &opts).unwrap()
            })
        });
    }
    group.finish();
}

fn evaluation(c: &mut Criterion) {
    let data = make_synthetic(2, 5000, 500, 1, QualityProfile::Mid).unwrap();
    let run = &data.runs["sys0"];
    let metrics = [Metric::ndcg(10), Metric::recall(100), Metric::judged(10)];
    let mut group = c.benchmark_group("evaluate_500q");
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| evaluate_with(run, &data.qrels, &metrics, Gain::Linear, exec).unwrap())
        });
    }
    group.finish();
}

fn dense_retrieval(c: &mut Criterion) {
    let data = make_synthetic(3, 5000, 100, 0, QualityProfile::Mid).unwrap();
    let queries: BTreeMap<String, Vec<f64>> = data.dense_queries.vectors.clone();
    let mut group = c.benchmark_group("dense_search_100q_5000d");
    group.sample_size(20);
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| {
                run_from_queries("dense", &queries, exec, |q| {
                    dense_search(&data.dense_docs, q, 1000, Similarity::Cosine)
                })
                .unwrap()
            })
        });
    }
    group.finish();
}

criterion_group!(benches, subset_search, evaluation, dense_retrieval);
criterion_main!(benches);
