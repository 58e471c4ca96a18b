use std::path::Path;
use std::process::{Command, Output};

fn rtrl(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rtrl"))
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) {
    let out = rtrl(dir, args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn setup(dir: &Path, extra: &str) {
    ok(
        dir,
        &[
            "gen-data", "cipher", "--n", "120", "--seed", "2", "--pairs", "--noise", "0.2",
            "--out", "d",
        ],
    );
    ok(
        dir,
        &[
            "gen-data",
            "split",
            "--input",
            "d/pairs.jsonl",
            "--seed",
            "2",
            "--out",
            "s",
        ],
    );
    let cfg = format!(
        "policy.order = 1\nseed = 3\ndata.pairs = s/train.jsonl\ndata.x = d/x.jsonl\n\
         data.y = d/y.jsonl\ndata.eval = s/test.jsonl\nsteps = 10\ngrpo.groups_per_step = 4\n\
         grpo.group_size = 4\nrun.checkpoint_every = 3\n{extra}"
    );
    std::fs::write(dir.join("run.cfg"), cfg).unwrap();
}

#[test]
fn usage_errors_are_one_line_with_status_2() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        &["train"][..],
        &["train", "--regime", "bogus", "--run-dir", "r"],
        &["nonsense"],
    ] {
        let out = rtrl(dir.path(), args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        let err = String::from_utf8(out.stderr).unwrap();
        assert_eq!(err.trim_end().lines().count(), 1, "{err}");
        assert!(err.starts_with("error:"));
    }
}

#[test]
fn bad_config_and_missing_inputs_fail_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.cfg"), "grpo.nonsense = 1\n").unwrap();
    let out = rtrl(
        dir.path(),
        &[
            "train",
            "--regime",
            "rtrl",
            "--config",
            "bad.cfg",
            "--run-dir",
            "r",
        ],
    );
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("grpo.nonsense"), "{err}");
    assert_eq!(err.trim_end().lines().count(), 1);

    let out = rtrl(dir.path(), &["report", "nowhere"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing report file"));
}

#[test]
fn interrupted_run_resumes_to_identical_results() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    setup(d, "");
    ok(
        d,
        &[
            "train",
            "--regime",
            "rtrl",
            "--config",
            "run.cfg",
            "--run-dir",
            "full",
        ],
    );
    ok(
        d,
        &[
            "train",
            "--regime",
            "rtrl",
            "--config",
            "run.cfg",
            "--run-dir",
            "part",
            "--stop-after",
            "7",
        ],
    );
    let out = rtrl(
        d,
        &[
            "train",
            "--regime",
            "rtrl",
            "--config",
            "run.cfg",
            "--run-dir",
            "part",
        ],
    );
    assert!(!out.status.success(), "an existing run dir needs --resume");
    ok(
        d,
        &["train", "--regime", "rtrl", "--run-dir", "part", "--resume"],
    );
    for f in [
        "steps.jsonl",
        "checkpoints/final.json",
        "final_report.json",
        "final_report.csv",
    ] {
        let a = std::fs::read(d.join("full").join(f)).unwrap();
        let b = std::fs::read(d.join("part").join(f)).unwrap();
        assert!(a == b, "{f} differs after resume");
    }
    assert_eq!(
        std::fs::read_to_string(d.join("full/steps.jsonl"))
            .unwrap()
            .lines()
            .count(),
        10
    );
}

#[test]
fn every_regime_runs_and_reports_merge() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    setup(d, "iterative.iterations = 2\nselfplay.rounds = 2\n");
    let regimes = [
        "sft",
        "rtrl",
        "iterative",
        "supervised",
        "selfplay",
        "em",
        "sft-syn-out",
        "sft-syn-in",
    ];
    for r in regimes {
        ok(
            d,
            &[
                "train",
                "--regime",
                r,
                "--config",
                "run.cfg",
                "--run-dir",
                r,
            ],
        );
        assert!(d.join(r).join("final_report.json").is_file(), "{r}");
    }
    ok(d, &["report", "sft", "rtrl", "em", "--out", "merged.csv"]);
    let csv = std::fs::read_to_string(d.join("merged.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 4);
    assert!(lines[0].starts_with("run_dir,run_id,regime,"));
    assert!(lines[2].starts_with("rtrl,"));
    assert!(!std::fs::read_dir(d.join("selfplay/synthetic"))
        .unwrap()
        .next()
        .is_none());
}

#[test]
fn eval_writes_named_reports() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    setup(d, "");
    ok(
        d,
        &[
            "train",
            "--regime",
            "sft",
            "--config",
            "run.cfg",
            "--run-dir",
            "r",
        ],
    );
    for (mode, direction) in [
        ("task", "forward"),
        ("task", "backward"),
        ("roundtrip", "forward"),
    ] {
        ok(
            d,
            &[
                "eval",
                "--checkpoint",
                "r/checkpoints/final.json",
                "--dataset",
                "s/test.jsonl",
                "--task",
                "cipher",
                "--mode",
                mode,
                "--direction",
                direction,
                "--out",
                "ev",
            ],
        );
        let json = d.join(format!("ev/{mode}-{direction}.json"));
        let report: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(json).unwrap()).unwrap();
        let em = report["metrics"]["exact_match"].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&em));
        assert!(d.join(format!("ev/{mode}-{direction}.csv")).is_file());
    }
    let out = rtrl(
        d,
        &[
            "eval",
            "--checkpoint",
            "r/checkpoints/final.json",
            "--dataset",
            "s/test.jsonl",
            "--task",
            "reaction",
            "--mode",
            "task",
            "--out",
            "ev2",
        ],
    );
    assert_eq!(
        out.status.code(),
        Some(1),
        "a reaction vocabulary cannot load a cipher checkpoint"
    );
}
