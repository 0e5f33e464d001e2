use std::hint::black_box;

use cdhf_core::features::build_dataset;
use cdhf_core::models::{auroc, train_tree_ensemble, TreeParams};
use cdhf_core::simulator::simulate_cohort;
use cdhf_core::{FeatureExtractor, ProgrammerProfile, SimulationConfig, Stage};
use criterion::{criterion_group, criterion_main, Criterion};
use rand::{Rng, SeedableRng};

fn small_cohort() -> cdhf_core::TelemetryStore {
    let cfg = SimulationConfig {
        n_programmers: 10,
        sessions_per_programmer: 4,
        events_per_session: 50,
        seed: 3,
        ..SimulationConfig::default()
    };
    simulate_cohort(&cfg, &[ProgrammerProfile::default()]).unwrap().0
}

fn bench_auroc(c: &mut Criterion) {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
    let scores: Vec<f64> = (0..50_000).map(|_| rng.random::<f64>()).collect();
    let labels: Vec<u8> = scores.iter().map(|&s| u8::from(rng.random::<f64>() < s)).collect();
    c.bench_function("auroc_50k", |b| b.iter(|| auroc(black_box(&scores), black_box(&labels)).unwrap()));
}

fn bench_extraction(c: &mut Criterion) {
    let store = small_cohort();
    let extractor = FeatureExtractor::for_stage(Stage::WithSuggestion);
    c.bench_function("extract_stage2_2k", |b| {
        b.iter(|| build_dataset(black_box(&store), &extractor).unwrap())
    });
}

fn bench_training(c: &mut Criterion) {
    let store = small_cohort();
    let ds = build_dataset(&store, &FeatureExtractor::for_stage(Stage::WithSuggestion)).unwrap();
    let params = TreeParams {
        n_trees: 20,
        ..TreeParams::default()
    };
    let mut group = c.benchmark_group("trees");
    group.sample_size(10);
    group.bench_function("train_20_trees_2k", |b| {
        b.iter(|| train_tree_ensemble(black_box(&ds), &params).unwrap())
    });
    group.finish();
}

criterion_group!(benches, bench_auroc, bench_extraction, bench_training);
criterion_main!(benches);
