use std::path::Path;
use std::process::{Command, Output};

fn cdhf(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cdhf"))
        .args(args)
        .current_dir(cwd)
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn usage_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(cdhf(&["frobnicate"], dir.path()).status.code(), Some(2));
    assert_eq!(cdhf(&["simulate", "--out", "d", "--bogus"], dir.path()).status.code(), Some(2));
    assert_eq!(cdhf(&["train", "--data", "d", "--stage", "3"], dir.path()).status.code(), Some(2));
    assert_eq!(cdhf(&["--help"], dir.path()).status.code(), Some(0));
}

#[test]
fn train_without_split_names_the_partition() {
    let dir = tempfile::tempdir().unwrap();
    let out = cdhf(&["train", "--data", "nothing-here", "--stage", "2"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let msg = stderr(&out);
    assert!(msg.contains("train.jsonl") && msg.contains("cdhf split"), "{msg}");
}

#[test]
fn module_errors_name_the_module() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.jsonl"), "{\"ts_ms\":0}\n").unwrap();
    let out = cdhf(&["summarize", "--input", "bad.jsonl"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).starts_with("error: telemetry: "), "{}", stderr(&out));
}

#[test]
fn simulate_twice_gives_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let small = ["--programmers", "3", "--sessions", "2", "--events", "20"];
    for d in ["a", "b"] {
        let mut args = vec!["--seed", "7", "simulate", "--out", d];
        args.extend(small);
        assert!(cdhf(&args, dir.path()).status.success());
    }
    for f in ["telemetry.jsonl", "annotations.jsonl", "summary.txt", "simulation.json"] {
        let a = std::fs::read(dir.path().join("a").join(f)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(f)).unwrap();
        assert_eq!(a, b, "{f}");
    }
    // Ingesting the simulated log reproduces it byte for byte.
    assert!(cdhf(&["ingest", "--input", "a", "--out", "c"], dir.path()).status.success());
    assert_eq!(
        std::fs::read(dir.path().join("a/telemetry.jsonl")).unwrap(),
        std::fs::read(dir.path().join("c/telemetry.jsonl")).unwrap()
    );
}

#[test]
fn break_even_table_agrees_on_default_profile() {
    let dir = tempfile::tempdir().unwrap();
    let out = cdhf(&["verify-prop1", "--profile", "default", "--out", "v"], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let table = String::from_utf8(out.stdout).unwrap();
    assert_eq!(table.lines().count(), 22);
    assert!(table.lines().skip(1).all(|l| l.trim_end().ends_with("true")));
    let csv = std::fs::read_to_string(dir.path().join("v/break-even.csv")).unwrap();
    assert!(csv.starts_with("p,p_star,"));
}

#[test]
fn staged_commands_write_their_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "seed = 5\n[trees]\nn_trees = 15\n[regression]\nmethod = \"linear\"\n").unwrap();
    let c = cfg.to_str().unwrap();
    let run = |args: &[&str]| {
        let mut all = vec!["--config", c];
        all.extend_from_slice(args);
        let o = cdhf(&all, dir.path());
        assert!(o.status.success(), "{args:?}: {}", stderr(&o));
        o
    };
    run(&["simulate", "--out", "d", "--programmers", "10", "--sessions", "3", "--events", "40"]);
    run(&["split", "--input", "d/telemetry.jsonl", "--out", "s"]);
    // Eval before training points at the missing model.
    let o = cdhf(&["--config", c, "eval", "--data", "s", "--out", "r", "--v1", "0.1", "--v2", "0.2"], dir.path());
    assert!(stderr(&o).contains("cdhf train --stage 1"), "{}", stderr(&o));
    run(&["train", "--data", "s", "--stage", "1"]);
    run(&["train", "--data", "s", "--stage", "2", "--model", "logistic"]);
    run(&["select-thresholds", "--data", "s", "--out", "s", "--target", "0.85"]);
    run(&["sweep", "--data", "s", "--out", "w", "--grid-steps", "20"]);
    run(&["eval", "--data", "s", "--out", "r"]);
    run(&["decide", "--models", "s", "--input", "s/test.jsonl", "--out", "x", "--v1", "0.1", "--v2", "0.3"]);
    run(&["summarize", "--input", "s/test.jsonl", "--format", "csv"]);

    let p = |f: &str| dir.path().join(f);
    assert!(p("s/stage1-tree-ensemble.json").is_file());
    assert!(p("s/stage2-logistic.json").is_file());
    assert!(p("s/thresholds.toml").is_file());
    assert_eq!(std::fs::read_to_string(p("w/tradeoff.csv")).unwrap().lines().count(), 21 * 21 + 1);
    let manifest = std::fs::read_to_string(p("r/manifest.sha256")).unwrap();
    for f in ["metrics.csv", "operating-point.txt", "summary.txt", "tradeoff.csv", "regression.txt"] {
        assert!(manifest.contains(f), "{f} missing from manifest");
    }
    let audit = std::fs::read_to_string(p("x/audit.jsonl")).unwrap();
    let summary = std::fs::read_to_string(p("x/decide-summary.txt")).unwrap();
    let events: usize = summary
        .lines()
        .find_map(|l| l.strip_prefix("events "))
        .unwrap()
        .parse()
        .unwrap();
    assert_eq!(audit.lines().count(), events);
}
