use cdhf_core::eval::{
    replay_with_scorer, retrospective_policy_eval, sample_complexity_curve, split_dataset, sweep_thresholds,
    EvalError, SplitMode, SplitSpec, StageModels,
};
use cdhf_core::features::build_dataset;
use cdhf_core::models::{load_model, save_model, train_logistic, train_tree_ensemble, LogisticParams, TreeParams};
use cdhf_core::policy::{ModelScorer, ThresholdGrid};
use cdhf_core::simulator::simulate_cohort;
use cdhf_core::telemetry::{parse_log_str, write_log, IngestOptions};
use cdhf_core::{FeatureExtractor, PolicyThresholds, ProgrammerProfile, SimulationConfig, Stage, TelemetryStore};

fn cohort(seed: u64) -> TelemetryStore {
    let cfg = SimulationConfig {
        n_programmers: 15,
        sessions_per_programmer: 3,
        events_per_session: 60,
        seed,
        ..SimulationConfig::default()
    };
    simulate_cohort(&cfg, &[ProgrammerProfile::default()]).unwrap().0
}

fn small_trees() -> TreeParams {
    TreeParams {
        n_trees: 30,
        ..TreeParams::default()
    }
}

fn reread(store: &TelemetryStore) -> TelemetryStore {
    let mut buf = Vec::new();
    write_log(store, &mut buf).unwrap();
    parse_log_str(std::str::from_utf8(&buf).unwrap(), &IngestOptions::default()).unwrap()
}

#[test]
fn replay_matches_sweep_on_every_grid_cell() {
    let store = cohort(21);
    let parts = split_dataset(&store, &SplitSpec::default()).unwrap();
    let e1 = FeatureExtractor::for_stage(Stage::PromptOnly);
    let e2 = FeatureExtractor::for_stage(Stage::WithSuggestion);
    let m1 = train_tree_ensemble(&build_dataset(&parts.train, &e1).unwrap(), &small_trees()).unwrap();
    let m2 = train_logistic(&build_dataset(&parts.train, &e2).unwrap(), &LogisticParams::default()).unwrap();
    let t1 = build_dataset(&parts.test, &e1).unwrap();
    let t2 = build_dataset(&parts.test, &e2).unwrap();
    let s1 = m1.predict_dataset(&t1).unwrap();
    let s2 = m2.predict_dataset(&t2).unwrap();
    let grid = ThresholdGrid::uniform(10);
    let curve = sweep_thresholds(&s1, &s2, &t2.labels, &grid).unwrap();
    let scorer = ModelScorer {
        stage1_model: &m1,
        stage1_features: &e1,
        stage2_model: &m2,
        stage2_features: &e2,
    };
    for p in &curve.points {
        let t = PolicyThresholds::new(p.v1, p.v2).unwrap();
        let op = replay_with_scorer(&t, &parts.test, &scorer).unwrap();
        assert_eq!(op.hidden_fraction, p.hidden_fraction, "({}, {})", p.v1, p.v2);
        assert_eq!(op.stage1_hidden_fraction, p.stage1_hidden_fraction);
        assert_eq!(op.hidden_rejected_precision, p.hidden_rejected_precision);
        assert_eq!(op.provider_calls + op.provider_calls_saved, op.events);
        assert_eq!(op.provider_calls_saved, op.hidden_stage1);
    }
}

#[test]
fn partitions_survive_their_own_log_files() {
    let store = cohort(22);
    let parts = split_dataset(&store, &SplitSpec::default()).unwrap();
    let e = FeatureExtractor::for_stage(Stage::WithSuggestion);
    let model = train_tree_ensemble(&build_dataset(&parts.train, &e).unwrap(), &small_trees())
        .unwrap()
        .with_training_sessions(&parts.train);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.json");
    save_model(&model, &path).unwrap();
    let loaded = load_model(&path).unwrap();
    assert_eq!(loaded, model);

    // Re-reading renumbers events but keeps session identity.
    let test = reread(&parts.test);
    assert_eq!(test.session_fingerprints(), parts.test.session_fingerprints());
    let a = model.predict_dataset(&build_dataset(&parts.test, &e).unwrap()).unwrap();
    let b = loaded.predict_dataset(&build_dataset(&test, &e).unwrap()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn training_sessions_in_test_are_refused() {
    let store = cohort(23);
    let parts = split_dataset(
        &store,
        &SplitSpec {
            mode: SplitMode::BySession,
            ..SplitSpec::default()
        },
    )
    .unwrap();
    let e1 = FeatureExtractor::for_stage(Stage::PromptOnly);
    let e2 = FeatureExtractor::for_stage(Stage::WithSuggestion);
    let leaked = reread(&parts.test);
    let m1 = train_tree_ensemble(&build_dataset(&parts.train, &e1).unwrap(), &small_trees())
        .unwrap()
        .with_training_sessions(&parts.train);
    let m2 = train_tree_ensemble(&build_dataset(&leaked, &e2).unwrap(), &small_trees())
        .unwrap()
        .with_training_sessions(&leaked);
    let models = StageModels {
        stage1: &m1,
        stage1_features: &e1,
        stage2: &m2,
        stage2_features: &e2,
    };
    let t = PolicyThresholds::new(0.1, 0.3).unwrap();
    let err = retrospective_policy_eval(&t, &parts.test, &models).unwrap_err();
    assert!(matches!(err, EvalError::PartitionOverlap { sessions } if sessions == parts.test.sessions().len()));
}

#[test]
fn sample_complexity_reports_every_fraction() {
    let store = cohort(24);
    let parts = split_dataset(&store, &SplitSpec::default()).unwrap();
    let e = FeatureExtractor::for_stage(Stage::WithSuggestion);
    let train = build_dataset(&parts.train, &e).unwrap();
    let test = build_dataset(&parts.test, &e).unwrap();
    let curve = sample_complexity_curve(&[0.2, 0.5], &train, &small_trees(), &test, &[1, 2]).unwrap();
    let fractions: Vec<f64> = curve.points.iter().map(|p| p.fraction).collect();
    assert_eq!(fractions, vec![0.2, 0.5, 1.0]);
    assert_eq!(curve.points[0].runs, 2);
    assert_eq!(curve.points[2].runs, 1);
    for p in &curve.points {
        assert!(p.auroc_min <= p.auroc && p.auroc <= p.auroc_max);
        assert!(p.auroc > 0.6, "{p:?}");
    }
    let again = sample_complexity_curve(&[0.2, 0.5], &train, &small_trees(), &test, &[1, 2]).unwrap();
    assert_eq!(again, curve);
}
