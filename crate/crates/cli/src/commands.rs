use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use cdhf_core::eval::{
    emit_report, retrospective_policy_eval, sample_complexity_curve, selective_csv, selective_prediction_curve,
    sha256_hex, split_dataset, sweep_thresholds, verification_time_regression, Artifacts, OperatingPoint,
    RegressionMethod, SplitMode, SplitSpec, StageModels, MIN_REGRESSION_ROWS,
};
use cdhf_core::features::build_dataset;
use cdhf_core::models::{
    classification_report, feature_importance, load_model, model_to_json, train_logistic, train_tree_ensemble,
    ClassifierMetrics, TreeParams,
};
use cdhf_core::policy::{
    count_grid, decide, select_thresholds, DecisionKind, DecisionRequest, ModelScorer, PolicyConfig,
    ProvidedSuggestion, ThresholdGrid,
};
use cdhf_core::seed::derive_seed;
use cdhf_core::simulator::{simulate_cohort, verify_break_even, write_annotations};
use cdhf_core::telemetry::{label_pairs, parse_log, summarize, write_log, IngestOptions};
use cdhf_core::{
    AcceptanceModel, FeatureExtractor, ModelKind, PolicyThresholds, ProgrammerProfile, Stage, TelemetryStore,
    TrainingDataset,
};
use serde::Serialize;

use crate::cli::{Command, FormatArg, ModeArg, ModelArg, PartitionArg, ThresholdArgs};
use crate::config::{Config, RegressionKind};
use crate::error::{CliError, Result};

/// Resolved settings shared by every subcommand.
pub struct Context {
    pub cfg: Config,
}

impl Context {
    pub fn new(mut cfg: Config, seed: Option<u64>) -> Self {
        if let Some(s) = seed {
            cfg.seed = s;
        }
        cfg.simulation.seed = cfg.seed;
        cfg.trees.seed = cfg.seed;
        cfg.logistic.seed = cfg.seed;
        Self { cfg }
    }

    fn seed(&self) -> u64 {
        self.cfg.seed
    }
}

pub fn run(ctx: &Context, command: Command) -> Result<()> {
    match command {
        Command::Simulate {
            out,
            programmers,
            sessions,
            events,
            profile,
        } => {
            let mut sim = ctx.cfg.simulation.clone();
            if let Some(n) = programmers {
                sim.n_programmers = n;
            }
            if let Some(n) = sessions {
                sim.sessions_per_programmer = n;
            }
            if let Some(n) = events {
                sim.events_per_session = n;
            }
            let profile = match profile {
                Some(p) => load_profile(&p)?,
                None => ctx.cfg.profile(),
            };
            simulate(&out, &sim, &profile).map(|_| ())
        }
        Command::Ingest {
            input,
            out,
            gap_minutes,
            prompt_bytes,
        } => {
            let mut opts = ctx.cfg.ingest_options();
            if let Some(g) = gap_minutes {
                if !(g.is_finite() && g > 0.0) {
                    return Err(CliError::Config(format!("--gap-minutes must be positive, got {g}")));
                }
                opts.gap_limit_ms = (g * 60_000.0).round() as u64;
            }
            if let Some(b) = prompt_bytes {
                opts.prompt_byte_budget = b;
            }
            ingest(&input, &out, &opts)
        }
        Command::Summarize { input, out, format } => {
            let store = read_log(&log_path(&input), &ctx.cfg.ingest_options())?;
            let summary = summarize(&store);
            let (text, csv) = (summary.to_text(), summary.to_csv());
            print!(
                "{}",
                match format {
                    FormatArg::Text => &text,
                    FormatArg::Csv => &csv,
                }
            );
            if let Some(dir) = out {
                create_dir(&dir)?;
                write_file(&dir.join("summary.txt"), &text)?;
                write_file(&dir.join("summary.csv"), &csv)?;
            }
            Ok(())
        }
        Command::Split {
            input,
            out,
            mode,
            ratios,
        } => {
            let mut spec = SplitSpec {
                mode: ctx.cfg.split.mode,
                ratios: ctx.cfg.split.ratios,
                seed: derive_seed(ctx.seed(), "split"),
            };
            if let Some(m) = mode {
                spec.mode = match m {
                    ModeArg::ByProgrammer => SplitMode::ByProgrammer,
                    ModeArg::BySession => SplitMode::BySession,
                };
            }
            if let Some(r) = ratios {
                spec.ratios = [r[0], r[1], r[2]];
            }
            let store = read_log(&log_path(&input), &ctx.cfg.ingest_options())?;
            split(&store, &spec, &out)
        }
        Command::Train {
            data,
            stage,
            model,
            out,
        } => {
            let stage = Stage::from_number(stage).expect("clap restricts the stage to 1 or 2");
            let out = out.unwrap_or_else(|| data.clone());
            train(ctx, &data, stage, model, &out).map(|_| ())
        }
        Command::SelectThresholds {
            data,
            models,
            out,
            target,
            grid_steps,
        } => {
            let models = models.unwrap_or_else(|| data.clone());
            let target = target.unwrap_or(ctx.cfg.policy.target_precision);
            let steps = grid_steps.unwrap_or(ctx.cfg.policy.grid_steps);
            select(ctx, &data, &models, &out, target, steps).map(|_| ())
        }
        Command::Sweep {
            data,
            models,
            out,
            partition,
            grid_steps,
        } => {
            let models = models.unwrap_or_else(|| data.clone());
            let steps = grid_steps.unwrap_or(ctx.cfg.policy.grid_steps);
            sweep(ctx, &data, &models, &out, partition, steps)
        }
        Command::Eval {
            data,
            models,
            out,
            thresholds,
        } => {
            let models = models.unwrap_or_else(|| data.clone());
            let t = resolve_thresholds(ctx, &thresholds, &models)?;
            eval(ctx, &data, &models, &out, t)
        }
        Command::Decide {
            models,
            input,
            out,
            thresholds,
        } => {
            let t = resolve_thresholds(ctx, &thresholds, &models)?;
            decide_log(ctx, &models, &log_path(&input), &out, t)
        }
        Command::VerifyProp1 {
            profile,
            samples,
            grid_points,
            not_expecting,
            out,
        } => verify_break_even_table(ctx, &load_profile(&profile)?, samples, grid_points, !not_expecting, out.as_deref()),
        Command::SampleComplexity {
            data,
            out,
            fractions,
            seeds,
        } => {
            let fractions = fractions.unwrap_or_else(|| ctx.cfg.sample_complexity.fractions.clone());
            let seeds = seeds.unwrap_or(ctx.cfg.sample_complexity.seeds);
            sample_complexity(ctx, &data, &out, &fractions, seeds)
        }
        Command::Pipeline { out } => pipeline(ctx, &out),
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_owned(),
        source,
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(io_err(dir))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(io_err(path))
}

fn write_store(path: &Path, store: &TelemetryStore) -> Result<()> {
    let file = fs::File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    write_log(store, &mut w)?;
    w.flush().map_err(io_err(path))
}

/// A directory argument stands for the `telemetry.jsonl` inside it.
fn log_path(input: &Path) -> PathBuf {
    if input.is_dir() {
        input.join("telemetry.jsonl")
    } else {
        input.to_owned()
    }
}

fn read_log(path: &Path, opts: &IngestOptions) -> Result<TelemetryStore> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    Ok(parse_log(BufReader::new(file), opts)?)
}

/// Reads `<dir>/<name>.jsonl` written by `split`.
fn read_partition(ctx: &Context, dir: &Path, name: &str) -> Result<TelemetryStore> {
    let path = dir.join(format!("{name}.jsonl"));
    if !path.is_file() {
        return Err(CliError::MissingInput {
            what: "partition file",
            path,
            hint: "split",
        });
    }
    read_log(&path, &ctx.cfg.ingest_options())
}

fn load_profile(spec: &str) -> Result<ProgrammerProfile> {
    if spec == "default" {
        return Ok(ProgrammerProfile::default());
    }
    let path = Path::new(spec);
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let profile: ProgrammerProfile = if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{spec}: {e}")))?
    } else {
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{spec}: {e}")))?
    };
    profile
        .validate()
        .map_err(cdhf_core::Error::from)?;
    Ok(profile)
}

fn json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("plain data serializes");
    s.push('\n');
    s
}

#[derive(Serialize)]
struct SimulationRecord<'a> {
    simulation: &'a cdhf_core::SimulationConfig,
    profile: &'a ProgrammerProfile,
    events: usize,
    labeled_events: usize,
    telemetry_sha256: String,
}

fn simulate(out: &Path, sim: &cdhf_core::SimulationConfig, profile: &ProgrammerProfile) -> Result<TelemetryStore> {
    create_dir(out)?;
    let (store, annotations) = simulate_cohort(sim, std::slice::from_ref(profile))?;
    write_store(&out.join("telemetry.jsonl"), &store)?;
    let path = out.join("annotations.jsonl");
    let file = fs::File::create(&path).map_err(io_err(&path))?;
    let mut w = BufWriter::new(file);
    write_annotations(&annotations, &mut w)?;
    w.flush().map_err(io_err(&path))?;
    let summary = summarize(&store).to_text();
    write_file(&out.join("summary.txt"), &summary)?;
    let record = SimulationRecord {
        simulation: sim,
        profile,
        events: store.event_count(),
        labeled_events: annotations.len(),
        telemetry_sha256: store.checksum(),
    };
    write_file(&out.join("simulation.json"), &json(&record))?;
    print!("{summary}");
    log::info!("simulated {} events into {}", store.event_count(), out.display());
    Ok(store)
}

fn ingest(input: &Path, out: &Path, opts: &IngestOptions) -> Result<()> {
    let store = read_log(&log_path(input), opts)?;
    create_dir(out)?;
    write_store(&out.join("telemetry.jsonl"), &store)?;
    let summary = summarize(&store).to_text();
    write_file(&out.join("summary.txt"), &summary)?;
    print!("{summary}");
    Ok(())
}

#[derive(Serialize)]
struct SplitRecord {
    spec: SplitSpec,
    partitions: BTreeMap<&'static str, PartitionRecord>,
}

#[derive(Serialize)]
struct PartitionRecord {
    programmers: usize,
    sessions: usize,
    events: usize,
    labeled_events: usize,
    sha256: String,
}

fn split(store: &TelemetryStore, spec: &SplitSpec, out: &Path) -> Result<()> {
    let parts = split_dataset(store, spec)?;
    create_dir(out)?;
    let mut partitions = BTreeMap::new();
    for (name, part) in parts.parts() {
        write_store(&out.join(format!("{name}.jsonl")), part)?;
        let record = PartitionRecord {
            programmers: part.programmer_ids().len(),
            sessions: part.sessions().len(),
            events: part.event_count(),
            labeled_events: label_pairs(part).len(),
            sha256: part.checksum(),
        };
        println!(
            "{name:<10} {:>4} programmers {:>5} sessions {:>7} labeled events",
            record.programmers, record.sessions, record.labeled_events
        );
        partitions.insert(name, record);
    }
    let record = SplitRecord {
        spec: spec.clone(),
        partitions,
    };
    write_file(&out.join("split.json"), &json(&record))
}

fn model_file(stage: Stage, kind: ModelKind) -> String {
    format!("stage{}-{kind}.json", stage.number())
}

/// Finds the stage model in `dir`, preferring the tree ensemble.
fn find_model(dir: &Path, stage: Stage) -> Result<(PathBuf, AcceptanceModel)> {
    for kind in [ModelKind::TreeEnsemble, ModelKind::Logistic] {
        let path = dir.join(model_file(stage, kind));
        if path.is_file() {
            let model = load_model(&path)?;
            return Ok((path, model));
        }
    }
    Err(CliError::MissingInput {
        what: "model",
        path: dir.join(model_file(stage, ModelKind::TreeEnsemble)),
        hint: match stage {
            Stage::PromptOnly => "train --stage 1",
            Stage::WithSuggestion => "train --stage 2",
        },
    })
}

fn metrics_csv_header() -> &'static str {
    "model,rows,positives,threshold,auroc,accuracy,macro_f1,ece\n"
}

fn metrics_csv_row(name: &str, m: &ClassifierMetrics) -> String {
    format!(
        "{name},{},{},{},{},{},{},{}\n",
        m.n, m.positives, m.threshold, m.auroc, m.accuracy, m.macro_f1, m.ece
    )
}

fn train(ctx: &Context, data: &Path, stage: Stage, kind: ModelArg, out: &Path) -> Result<AcceptanceModel> {
    let store = read_partition(ctx, data, "train")?;
    let extractor = FeatureExtractor::for_stage(stage);
    let ds = build_dataset(&store, &extractor)?;
    log::info!(
        "training stage {} {} on {} rows ({} positive)",
        stage.number(),
        kind.as_str(),
        ds.len(),
        ds.positives()
    );
    let model = match kind {
        ModelArg::TreeEnsemble => train_tree_ensemble(&ds, &ctx.cfg.trees)?,
        ModelArg::Logistic => train_logistic(&ds, &ctx.cfg.logistic)?,
    }
    .with_training_sessions(&store);

    create_dir(out)?;
    let stem = format!("stage{}-{}", stage.number(), model.kind);
    write_file(&out.join(format!("{stem}.json")), &model_to_json(&model)?)?;

    let mut loss = String::from("step,loss\n");
    for (i, l) in model.metadata.loss_trace.iter().enumerate() {
        writeln!(loss, "{i},{l}").unwrap();
    }
    write_file(&out.join(format!("{stem}.loss.csv")), &loss)?;

    if model.kind == ModelKind::TreeEnsemble {
        let report = feature_importance(&model)?;
        write_file(&out.join(format!("{stem}.importance.csv")), &report.to_csv())?;
        let top: Vec<&str> = report.entries.iter().take(5).map(|e| e.name.as_str()).collect();
        println!("top features: {}", top.join(", "));
    }

    let mut metrics = metrics_csv_header().to_owned();
    let train_scores = model.predict_dataset(&ds)?;
    let m = classification_report(&train_scores, &ds.labels, 0.5)?;
    metrics.push_str(&metrics_csv_row("train", &m));
    println!("stage {} train auroc {:.4}", stage.number(), m.auroc);
    let val_path = data.join("validation.jsonl");
    if val_path.is_file() {
        let val = build_dataset(&read_log(&val_path, &ctx.cfg.ingest_options())?, &extractor)?;
        let m = classification_report(&model.predict_dataset(&val)?, &val.labels, 0.5)?;
        metrics.push_str(&metrics_csv_row("validation", &m));
        println!("stage {} validation auroc {:.4}", stage.number(), m.auroc);
    }
    write_file(&out.join(format!("{stem}.metrics.csv")), &metrics)?;
    Ok(model)
}

/// Stage-1 and stage-2 scores for every labeled event of a partition, plus
/// the stage-2 dataset (its labels and rows are shared by both stages).
struct Scored {
    stage1: Vec<f64>,
    stage2: Vec<f64>,
    dataset: TrainingDataset,
}

fn score_partition(store: &TelemetryStore, m1: &AcceptanceModel, m2: &AcceptanceModel) -> Result<Scored> {
    let ds1 = build_dataset(store, &FeatureExtractor::new(m1.schema.clone())?)?;
    let ds2 = build_dataset(store, &FeatureExtractor::new(m2.schema.clone())?)?;
    Ok(Scored {
        stage1: m1.predict_dataset(&ds1)?,
        stage2: m2.predict_dataset(&ds2)?,
        dataset: ds2,
    })
}

#[derive(Serialize)]
struct SelectionRecord {
    partition: &'static str,
    target_precision: f64,
    grid_steps: usize,
    selection: cdhf_core::policy::ThresholdSelection,
}

fn select(
    ctx: &Context,
    data: &Path,
    models: &Path,
    out: &Path,
    target: f64,
    steps: usize,
) -> Result<PolicyThresholds> {
    let (_, m1) = find_model(models, Stage::PromptOnly)?;
    let (_, m2) = find_model(models, Stage::WithSuggestion)?;
    let store = read_partition(ctx, data, "validation")?;
    let s = score_partition(&store, &m1, &m2)?;
    let selection = select_thresholds(
        &s.stage1,
        &s.stage2,
        &s.dataset.labels,
        target,
        &ThresholdGrid::uniform(steps),
    )?;
    if !selection.feasible {
        log::warn!("no threshold pair hides anything at precision {target}; using (0, 0)");
    }
    let policy = PolicyConfig {
        thresholds: selection.thresholds,
        utility: None,
        expecting_default: true,
    };
    create_dir(out)?;
    let text = toml::to_string(&policy).map_err(|e| CliError::Config(e.to_string()))?;
    write_file(&out.join("thresholds.toml"), &text)?;
    let t = selection.thresholds;
    println!(
        "v1 {} v2 {} hidden {:.4} precision {}",
        t.v1,
        t.v2,
        selection.hidden_fraction,
        selection.hidden_precision.map_or_else(|| "n/a".into(), |p| format!("{p:.4}"))
    );
    let record = SelectionRecord {
        partition: "validation",
        target_precision: target,
        grid_steps: steps,
        selection,
    };
    write_file(&out.join("selection.json"), &json(&record))?;
    Ok(t)
}

fn sweep(ctx: &Context, data: &Path, models: &Path, out: &Path, partition: PartitionArg, steps: usize) -> Result<()> {
    let (_, m1) = find_model(models, Stage::PromptOnly)?;
    let (_, m2) = find_model(models, Stage::WithSuggestion)?;
    let store = read_partition(ctx, data, partition.file_stem())?;
    let s = score_partition(&store, &m1, &m2)?;
    let curve = sweep_thresholds(&s.stage1, &s.stage2, &s.dataset.labels, &ThresholdGrid::uniform(steps))?;
    create_dir(out)?;
    write_file(&out.join("tradeoff.csv"), &curve.to_csv())?;
    println!("{} grid points written to {}", curve.points.len(), out.join("tradeoff.csv").display());
    Ok(())
}

fn resolve_thresholds(ctx: &Context, args: &ThresholdArgs, models: &Path) -> Result<PolicyThresholds> {
    if let (Some(v1), Some(v2)) = (args.v1, args.v2) {
        return Ok(PolicyThresholds::new(v1, v2).map_err(cdhf_core::Error::from)?);
    }
    if args.thresholds.is_none() {
        if let (Some(v1), Some(v2)) = (ctx.cfg.policy.v1, ctx.cfg.policy.v2) {
            return Ok(PolicyThresholds::new(v1, v2).map_err(cdhf_core::Error::from)?);
        }
    }
    let path = args.thresholds.clone().unwrap_or_else(|| models.join("thresholds.toml"));
    if !path.is_file() {
        return Err(CliError::MissingInput {
            what: "policy file",
            path,
            hint: "select-thresholds",
        });
    }
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    let policy: PolicyConfig = toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    policy.thresholds.validate().map_err(cdhf_core::Error::from)?;
    Ok(policy.thresholds)
}

fn reliability_csv(rows: &[(&str, &ClassifierMetrics)]) -> String {
    let mut s = String::from("model,bin,lower,upper,mean_predicted,empirical_rate,count\n");
    for (name, m) in rows {
        for (i, b) in m.reliability_bins.iter().enumerate() {
            writeln!(
                s,
                "{name},{i},{},{},{},{},{}",
                b.lower, b.upper, b.mean_predicted, b.empirical_rate, b.count
            )
            .unwrap();
        }
    }
    s
}

/// Recounts the operating point from scores alone and checks that the replay
/// agrees, including provider calls saved against stage-1 hides.
fn check_replay(point: &OperatingPoint, s: &Scored) -> Result<()> {
    let grid = ThresholdGrid {
        v1: vec![point.v1],
        v2: vec![point.v2],
    };
    let counts = count_grid(&s.stage1, &s.stage2, &s.dataset.labels, &grid)?;
    let cell = counts.cell(0, 0);
    let ok = cell.hidden_stage1 == point.hidden_stage1
        && cell.hidden_stage2 == point.hidden_stage2
        && cell.hidden_stage1_rejects == point.hidden_stage1_rejects
        && cell.hidden_stage2_rejects == point.hidden_stage2_rejects
        && point.provider_calls_saved == point.hidden_stage1
        && cell.total() == point.events;
    if ok {
        Ok(())
    } else {
        Err(CliError::Check(format!(
            "replay disagrees with the threshold sweep at v1 {} v2 {}: sweep hides {} + {}, replay hides {} + {} and saved {} provider calls",
            point.v1,
            point.v2,
            cell.hidden_stage1,
            cell.hidden_stage2,
            point.hidden_stage1,
            point.hidden_stage2,
            point.provider_calls_saved
        )))
    }
}

fn eval(ctx: &Context, data: &Path, models: &Path, out: &Path, t: PolicyThresholds) -> Result<()> {
    let (p1, m1) = find_model(models, Stage::PromptOnly)?;
    let (p2, m2) = find_model(models, Stage::WithSuggestion)?;
    let test = read_partition(ctx, data, "test")?;
    let s = score_partition(&test, &m1, &m2)?;
    let labels = &s.dataset.labels;

    let r1 = classification_report(&s.stage1, labels, 0.5)?;
    let r2 = classification_report(&s.stage2, labels, 0.5)?;
    // Predicts the majority class for every event.
    let majority = f64::from(u8::from(2 * s.dataset.positives() > labels.len()));
    let rb = classification_report(&vec![majority; labels.len()], labels, 0.5)?;

    let mut artifacts = Artifacts::new();
    let mut metrics = metrics_csv_header().to_owned();
    metrics.push_str(&metrics_csv_row("stage1", &r1));
    metrics.push_str(&metrics_csv_row("stage2", &r2));
    metrics.push_str(&metrics_csv_row("majority", &rb));
    artifacts.insert("metrics.csv".into(), metrics);
    artifacts.insert("reliability.csv".into(), reliability_csv(&[("stage1", &r1), ("stage2", &r2)]));
    artifacts.insert(
        "selective-stage1.csv".into(),
        selective_csv(&selective_prediction_curve(&s.stage1, labels)?),
    );
    artifacts.insert(
        "selective-stage2.csv".into(),
        selective_csv(&selective_prediction_curve(&s.stage2, labels)?),
    );
    let curve = sweep_thresholds(
        &s.stage1,
        &s.stage2,
        labels,
        &ThresholdGrid::uniform(ctx.cfg.policy.grid_steps),
    )?;
    artifacts.insert("tradeoff.csv".into(), curve.to_csv());

    let e1 = FeatureExtractor::new(m1.schema.clone())?;
    let e2 = FeatureExtractor::new(m2.schema.clone())?;
    let point = retrospective_policy_eval(
        &t,
        &test,
        &StageModels {
            stage1: &m1,
            stage1_features: &e1,
            stage2: &m2,
            stage2_features: &e2,
        },
    )?;
    check_replay(&point, &s)?;
    artifacts.insert("operating-point.txt".into(), point.to_text());

    let mut importance = String::new();
    if m2.kind == ModelKind::TreeEnsemble {
        importance = feature_importance(&m2)?.to_csv();
        artifacts.insert("importance-stage2.csv".into(), importance.clone());
    }

    let mut regression = None;
    if ctx.cfg.regression.enabled && s.dataset.len() >= MIN_REGRESSION_ROWS {
        let method = match ctx.cfg.regression.method {
            RegressionKind::Linear => RegressionMethod::Linear,
            RegressionKind::Trees => RegressionMethod::Trees(TreeParams {
                n_trees: ctx.cfg.regression.n_trees,
                ..ctx.cfg.trees.clone()
            }),
        };
        let report = verification_time_regression(&s.dataset, &method, derive_seed(ctx.seed(), "regression"))?;
        artifacts.insert("regression.txt".into(), report.to_text());
        regression = Some(report);
    }

    let mut summary = String::new();
    writeln!(summary, "seed {}", ctx.seed()).unwrap();
    writeln!(summary, "test_log_sha256 {}", test.checksum()).unwrap();
    for (name, path) in [("stage1_model", &p1), ("stage2_model", &p2)] {
        let bytes = fs::read(path).map_err(io_err(path))?;
        writeln!(summary, "{name} {}", path.file_name().unwrap_or_default().to_string_lossy()).unwrap();
        writeln!(summary, "{name}_sha256 {}", sha256_hex(&bytes)).unwrap();
    }
    writeln!(summary, "labeled_events {}", labels.len()).unwrap();
    writeln!(summary, "acceptance_rate {:.6}", s.dataset.positive_rate()).unwrap();
    writeln!(summary, "stage1_auroc {:.6}", r1.auroc).unwrap();
    writeln!(summary, "stage2_auroc {:.6}", r2.auroc).unwrap();
    writeln!(summary, "stage2_ece {:.6}", r2.ece).unwrap();
    writeln!(summary, "majority_accuracy {:.6}", rb.accuracy).unwrap();
    summary.push_str(&point.to_text());
    if let Some(r) = &regression {
        writeln!(summary, "verification_time_r2 {:.6}", r.r2).unwrap();
    }
    if !importance.is_empty() {
        if let Some(line) = importance.lines().nth(1) {
            writeln!(summary, "top_stage2_feature {}", line.split(',').nth(1).unwrap_or("")).unwrap();
        }
    }
    artifacts.insert("summary.txt".into(), summary.clone());

    let manifest = emit_report(out, &artifacts)?;
    print!("{summary}");
    log::info!("wrote {} artifacts to {}", manifest.files.len(), out.display());
    Ok(())
}

fn decide_log(ctx: &Context, models: &Path, input: &Path, out: &Path, t: PolicyThresholds) -> Result<()> {
    let (_, m1) = find_model(models, Stage::PromptOnly)?;
    let (_, m2) = find_model(models, Stage::WithSuggestion)?;
    let e1 = FeatureExtractor::new(m1.schema.clone())?;
    let e2 = FeatureExtractor::new(m2.schema.clone())?;
    let scorer = ModelScorer {
        stage1_model: &m1,
        stage1_features: &e1,
        stage2_model: &m2,
        stage2_features: &e2,
    };
    let store = read_log(input, &ctx.cfg.ingest_options())?;
    create_dir(out)?;
    let path = out.join("audit.jsonl");
    let file = fs::File::create(&path).map_err(io_err(&path))?;
    let mut w = BufWriter::new(file);
    let mut counts = [0usize; 3];
    let calls = std::cell::Cell::new(0usize);
    for pair in label_pairs(&store) {
        let shown = pair.shown();
        let request = DecisionRequest {
            programmer_id: &shown.programmer_id,
            timestamp_ms: shown.timestamp_ms,
            prompt: &shown.prompt,
            context: pair.context(),
        };
        let provider = |_: &DecisionRequest<'_>| {
            calls.set(calls.get() + 1);
            Ok(ProvidedSuggestion {
                text: shown.suggestion.clone(),
                confidence: shown.suggestion_confidence,
                latency_ms: 0.0,
            })
        };
        let decision = decide(&scorer, &t, &request, &provider)?;
        counts[match decision.kind() {
            DecisionKind::HiddenStage1 => 0,
            DecisionKind::HiddenStage2 => 1,
            DecisionKind::Shown => 2,
        }] += 1;
        let line = serde_json::to_string(&decision.audit(Some(shown.event_id))).expect("audit record serializes");
        writeln!(w, "{line}").map_err(io_err(&path))?;
    }
    w.flush().map_err(io_err(&path))?;
    let n: usize = counts.iter().sum();
    let summary = format!(
        "v1 {}\nv2 {}\nevents {n}\nhidden_stage1 {}\nhidden_stage2 {}\nshown {}\nprovider_calls {}\n",
        t.v1,
        t.v2,
        counts[0],
        counts[1],
        counts[2],
        calls.get()
    );
    write_file(&out.join("decide-summary.txt"), &summary)?;
    print!("{summary}");
    Ok(())
}

fn verify_break_even_table(
    ctx: &Context,
    profile: &ProgrammerProfile,
    samples: usize,
    grid_points: usize,
    expecting: bool,
    out: Option<&Path>,
) -> Result<()> {
    if grid_points < 2 {
        return Err(CliError::Config("--grid-points must be at least 2".into()));
    }
    let grid: Vec<f64> = (0..grid_points).map(|i| i as f64 / (grid_points - 1) as f64).collect();
    let rows = verify_break_even(profile, &grid, samples, expecting, derive_seed(ctx.seed(), "verify-prop1"))?;
    let mut table = format!(
        "{:>6} {:>8} {:>12} {:>12} {:>9} {:>5} {:>5} {:>9}\n",
        "p", "p_star", "closed_form", "monte_carlo", "std_err", "sign", "3se", "agreement"
    );
    let mut csv = String::from("p,p_star,delta_closed_form,delta_monte_carlo,std_error,sign_agrees,within_three_se,agreement\n");
    for r in &rows {
        writeln!(
            table,
            "{:>6.3} {:>8.4} {:>12.4} {:>12.4} {:>9.4} {:>5} {:>5} {:>9}",
            r.p,
            r.pstar,
            r.delta_closed_form,
            r.delta_monte_carlo,
            r.std_error,
            r.sign_agrees,
            r.within_three_se,
            r.agreement
        )
        .unwrap();
        writeln!(
            csv,
            "{},{},{},{},{},{},{},{}",
            r.p, r.pstar, r.delta_closed_form, r.delta_monte_carlo, r.std_error, r.sign_agrees, r.within_three_se, r.agreement
        )
        .unwrap();
    }
    print!("{table}");
    if let Some(dir) = out {
        create_dir(dir)?;
        write_file(&dir.join("break-even.csv"), &csv)?;
    }
    let failed = rows.iter().filter(|r| !r.agreement).count();
    if failed > 0 {
        return Err(CliError::Check(format!("{failed} of {} grid rows disagree", rows.len())));
    }
    Ok(())
}

fn sample_complexity(ctx: &Context, data: &Path, out: &Path, fractions: &[f64], seeds: usize) -> Result<()> {
    let extractor = FeatureExtractor::for_stage(Stage::WithSuggestion);
    let train = build_dataset(&read_partition(ctx, data, "train")?, &extractor)?;
    let test = build_dataset(&read_partition(ctx, data, "test")?, &extractor)?;
    let seeds: Vec<u64> = (0..seeds.max(1))
        .map(|k| derive_seed(ctx.seed(), &format!("sample-complexity/{k}")))
        .collect();
    let curve = sample_complexity_curve(fractions, &train, &ctx.cfg.trees, &test, &seeds)?;
    create_dir(out)?;
    let csv = curve.to_csv();
    write_file(&out.join("sample-complexity.csv"), &csv)?;
    print!("{csv}");
    Ok(())
}

fn pipeline(ctx: &Context, out: &Path) -> Result<()> {
    let data = out.join("data");
    let split_dir = out.join("split");
    let models = out.join("models");
    let report = out.join("report");

    let store = simulate(&data, &ctx.cfg.simulation, &ctx.cfg.profile())?;
    let spec = SplitSpec {
        mode: ctx.cfg.split.mode,
        ratios: ctx.cfg.split.ratios,
        seed: derive_seed(ctx.seed(), "split"),
    };
    split(&store, &spec, &split_dir)?;
    drop(store);
    for stage in [Stage::PromptOnly, Stage::WithSuggestion] {
        train(ctx, &split_dir, stage, ModelArg::TreeEnsemble, &models)?;
    }
    let t = match (ctx.cfg.policy.v1, ctx.cfg.policy.v2) {
        (Some(v1), Some(v2)) => PolicyThresholds::new(v1, v2).map_err(cdhf_core::Error::from)?,
        _ => select(
            ctx,
            &split_dir,
            &models,
            &models,
            ctx.cfg.policy.target_precision,
            ctx.cfg.policy.grid_steps,
        )?,
    };
    eval(ctx, &split_dir, &models, &report, t)?;
    if ctx.cfg.sample_complexity.enabled {
        sample_complexity(
            ctx,
            &split_dir,
            &out.join("sample-complexity"),
            &ctx.cfg.sample_complexity.fractions,
            ctx.cfg.sample_complexity.seeds,
        )?;
    }
    Ok(())
}
