use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::{Duration, Instant};

use har_core::ingest::ChannelSet;
use har_core::synthetic::{generate_records, write_layout, ActivityProfile, SyntheticSpec};
use har_core::DatasetId;

fn workspace() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn har(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_har"))
        .args(args)
        .current_dir(cwd)
        .env_remove("HAR_LLM_API_KEY")
        .output()
        .expect("spawn har")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn copy_dir(from: &Path, to: &Path) {
    std::fs::create_dir_all(to).unwrap();
    for e in std::fs::read_dir(from).unwrap() {
        let p = e.unwrap().path();
        let dest = to.join(p.file_name().unwrap());
        if p.is_dir() {
            copy_dir(&p, &dest);
        } else {
            std::fs::copy(&p, &dest).unwrap();
        }
    }
}

/// Copies the bundled fixture and a pipeline file into `dir`, keeping their
/// relative layout.
fn stage_fixture(dir: &Path, config: &str) -> PathBuf {
    copy_dir(
        &workspace().join("fixtures/shoaib_small"),
        &dir.join("fixtures/shoaib_small"),
    );
    std::fs::create_dir_all(dir.join("pipelines")).unwrap();
    let dest = dir.join("pipelines").join(config);
    std::fs::copy(workspace().join("pipelines").join(config), &dest).unwrap();
    dest
}

fn ran_stages(o: &Output) -> Vec<String> {
    stderr(o)
        .lines()
        .filter(|l| l.contains(": ran in"))
        .map(|l| {
            l.split("] ")
                .nth(1)
                .unwrap()
                .split(':')
                .next()
                .unwrap()
                .to_string()
        })
        .collect()
}

fn report_json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn help_and_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let o = har(&["--help"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stdout).contains("Usage"));
    for sub in ["ingest", "train", "eval", "pipeline", "analyze"] {
        assert_eq!(
            har(&[sub, "--help"], dir.path()).status.code(),
            Some(0),
            "{sub}"
        );
    }
    let o = har(&["train", "--bogus"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--bogus"));
    assert_eq!(har(&["frobnicate"], dir.path()).status.code(), Some(2));
    // Seeds are mandatory.
    let o = har(
        &[
            "train",
            "--model",
            "rf",
            "--features",
            "f.csv",
            "--split",
            "seen",
            "--out",
            "m.json",
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--seed"));
    // Malformed split after parsing is still a usage error.
    std::fs::write(dir.path().join("f.csv"), "dataset,subject,activity,fs\n").unwrap();
    let o = har(
        &[
            "train",
            "--model",
            "rf",
            "--features",
            "f.csv",
            "--split",
            "sometimes",
            "--seed",
            "1",
            "--out",
            "m.json",
        ],
        dir.path(),
    );
    assert_ne!(o.status.code(), Some(0));
}

#[test]
fn runtime_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = har(
        &["segment", "--in", "missing.csv", "--out", "w.jsonl"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("missing.csv"));
    assert!(!dir.path().join("w.jsonl").exists());
    let o = har(
        &[
            "ingest",
            "--dataset",
            "wisdm",
            "--root",
            ".",
            "--out",
            "r.csv",
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(1));
    assert!(!dir.path().join("r.csv").exists());
}

#[test]
fn fixture_pipeline_accuracy_and_runtime() {
    let dir = tempfile::tempdir().unwrap();
    let config = stage_fixture(dir.path(), "fixture.toml");
    let start = Instant::now();
    let o = har(
        &["pipeline", "--config", config.to_str().unwrap()],
        dir.path(),
    );
    let elapsed = start.elapsed();
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(elapsed < Duration::from_secs(30), "{elapsed:?}");
    let report = report_json(&dir.path().join("pipelines/work/fixture/report.json"));
    let acc = report["accuracy"].as_f64().unwrap();
    assert!(acc >= 0.9, "accuracy {acc}");
    assert_eq!(report["model"], "RF");
    assert_eq!(report["split"], "seen");
    let md = std::fs::read_to_string(dir.path().join("pipelines/work/fixture/report.md")).unwrap();
    assert!(md.starts_with("| Dataset | Model |"));
}

#[test]
fn incremental_rebuild() {
    let dir = tempfile::tempdir().unwrap();
    let config = stage_fixture(dir.path(), "fixture.toml");
    let cfg = config.to_str().unwrap();
    let first = har(&["pipeline", "--config", cfg], dir.path());
    assert_eq!(first.status.code(), Some(0), "{}", stderr(&first));
    assert_eq!(ran_stages(&first).len(), 6);

    let again = har(&["pipeline", "--config", cfg], dir.path());
    assert_eq!(again.status.code(), Some(0));
    assert!(ran_stages(&again).is_empty(), "{}", stderr(&again));
    assert_eq!(stderr(&again).matches("skipped (up to date)").count(), 6);

    // Drop the last feature row: train and eval re-run. The report stage
    // follows only if the eval output bytes changed.
    let features = dir.path().join("pipelines/work/fixture/features.csv");
    let text = std::fs::read_to_string(&features).unwrap();
    let mut lines: Vec<&str> = text.lines().collect();
    lines.pop();
    std::fs::write(&features, lines.join("\n") + "\n").unwrap();
    let third = har(&["pipeline", "--config", cfg], dir.path());
    assert_eq!(third.status.code(), Some(0), "{}", stderr(&third));
    let ran = ran_stages(&third);
    assert_eq!(ran[..2], ["train", "eval"], "{}", stderr(&third));
    assert!(ran[2..].iter().all(|s| s == "report"));

    // Deleting an output re-runs its producer only while inputs are unchanged.
    std::fs::remove_file(dir.path().join("pipelines/work/fixture/report.md")).unwrap();
    let fourth = har(&["pipeline", "--config", cfg], dir.path());
    assert_eq!(ran_stages(&fourth), vec!["report"]);

    let forced = har(&["pipeline", "--force", "--config", cfg], dir.path());
    assert_eq!(ran_stages(&forced).len(), 6);
}

#[test]
fn pipeline_rejects_cycles_and_missing_inputs_before_running() {
    let dir = tempfile::tempdir().unwrap();
    let cyclic = r#"
        [[stage]]
        name = "a"
        argv = ["report", "--in", "b.json", "--out", "a.json"]
        inputs = ["b.json"]
        outputs = ["a.json"]

        [[stage]]
        name = "b"
        argv = ["report", "--in", "a.json", "--out", "b.json"]
        inputs = ["a.json"]
        outputs = ["b.json"]

        [[stage]]
        name = "independent"
        argv = ["report", "--in", "seed.json", "--out", "c.md"]
        inputs = ["seed.json"]
        outputs = ["c.md"]
    "#;
    std::fs::write(dir.path().join("seed.json"), "[]").unwrap();
    std::fs::write(dir.path().join("cyclic.toml"), cyclic).unwrap();
    let o = har(&["pipeline", "--config", "cyclic.toml"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("cycle"));
    assert!(!dir.path().join("c.md").exists());

    let missing = r#"
        [[stage]]
        name = "first"
        argv = ["report", "--in", "seed.json", "--out", "c.md"]
        inputs = ["seed.json"]
        outputs = ["c.md"]

        [[stage]]
        name = "second"
        argv = ["report", "--in", "absent.json", "--out", "d.md"]
        inputs = ["absent.json"]
        outputs = ["d.md"]
    "#;
    std::fs::write(dir.path().join("missing.toml"), missing).unwrap();
    let o = har(&["pipeline", "--config", "missing.toml"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("absent.json"));
    assert!(!dir.path().join("c.md").exists());
}

#[test]
fn fixture_pipeline_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let config = stage_fixture(d.path(), "fixture.toml");
        let o = har(
            &["pipeline", "--config", config.to_str().unwrap()],
            d.path(),
        );
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    for f in [
        "records.csv",
        "windows.jsonl",
        "features.csv",
        "rf.json",
        "report.json",
        "report.md",
    ] {
        let rel = format!("pipelines/work/fixture/{f}");
        assert_eq!(
            std::fs::read(a.path().join(&rel)).unwrap(),
            std::fs::read(b.path().join(&rel)).unwrap(),
            "{f}"
        );
    }
}

/// Features for the fixture, built with individual subcommands.
fn fixture_features(dir: &Path) -> PathBuf {
    copy_dir(&workspace().join("fixtures/shoaib_small"), &dir.join("fx"));
    let steps: [&[&str]; 3] = [
        &[
            "ingest",
            "--dataset",
            "shoaib",
            "--root",
            "fx",
            "--out",
            "records.csv",
        ],
        &[
            "segment",
            "--in",
            "records.csv",
            "--window",
            "50",
            "--step",
            "10",
            "--out",
            "windows.jsonl",
        ],
        &["features", "--in", "windows.jsonl", "--out", "features.csv"],
    ];
    for s in steps {
        let o = har(s, dir);
        assert_eq!(o.status.code(), Some(0), "{s:?}: {}", stderr(&o));
    }
    dir.join("features.csv")
}

#[test]
fn prompt_and_llm_subcommands() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fixture_features(d);

    let o = har(
        &[
            "promptgen",
            "--features",
            "features.csv",
            "--mode",
            "reasoned",
            "--out",
            "pairs.jsonl",
        ],
        d,
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let pairs = std::fs::read_to_string(d.join("pairs.jsonl")).unwrap();
    assert_eq!(pairs.lines().count(), 64);
    for line in pairs.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        let keys: Vec<&String> = v.as_object().unwrap().keys().collect();
        assert_eq!(keys, ["input", "instruction", "output"]);
    }

    let o = har(
        &[
            "tokenbudget",
            "--windows",
            "windows.jsonl",
            "--out",
            "budget.json",
        ],
        d,
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let budget = report_json(&d.join("budget.json"));
    assert_eq!(budget["n_windows"], 64);
    assert_eq!(budget["windows"].as_array().unwrap().len(), 64);

    let o = har(
        &[
            "llm-classify",
            "--backend",
            "mock",
            "--mock-features",
            "features.csv",
            "--features",
            "features.csv",
            "--out",
            "results.jsonl",
        ],
        d,
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let results = std::fs::read_to_string(d.join("results.jsonl")).unwrap();
    assert_eq!(results.lines().count(), 64);
    let first: serde_json::Value = serde_json::from_str(results.lines().next().unwrap()).unwrap();
    for key in [
        "prompt",
        "raw_text",
        "parsed_label",
        "latency_s",
        "token_estimate_in",
        "token_estimate_out",
    ] {
        assert!(first.get(key).is_some(), "{key}");
    }

    let o = har(
        &[
            "llm-classify",
            "--backend",
            "mock",
            "--features",
            "features.csv",
            "--out",
            "x.jsonl",
        ],
        d,
    );
    assert_eq!(o.status.code(), Some(2), "mock without fit data");

    let o = har(
        &[
            "qa",
            "--backend",
            "mock",
            "--mock-features",
            "features.csv",
            "--features",
            "features.csv",
            "--question",
            "Which channel varies most?",
            "--limit",
            "3",
            "--out",
            "qa.jsonl",
        ],
        d,
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(
        std::fs::read_to_string(d.join("qa.jsonl"))
            .unwrap()
            .lines()
            .count(),
        3
    );

    std::fs::copy(
        workspace().join("pipelines/mock_llm.toml"),
        d.join("mock_llm.toml"),
    )
    .unwrap();
    let o = har(
        &[
            "eval",
            "--model",
            "mock_llm.toml",
            "--features",
            "features.csv",
            "--split",
            "seen",
            "--seed",
            "3",
            "--out",
            "llm.json",
        ],
        d,
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r = report_json(&d.join("llm.json"));
    assert_eq!(r["model"], "LLM");
    assert!(r["accuracy"].as_f64().unwrap() > 0.5);
}

#[test]
fn train_eval_report_and_analysis() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fixture_features(d);
    for (model, split) in [("svm", "seen"), ("dnn", "seen"), ("rf", "unseen")] {
        let m = format!("{model}-{split}.json");
        let r = format!("{model}-{split}-report.json");
        let o = har(
            &[
                "train",
                "--model",
                model,
                "--features",
                "features.csv",
                "--split",
                split,
                "--seed",
                "5",
                "--out",
                &m,
            ],
            d,
        );
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        let o = har(
            &[
                "eval",
                "--model",
                &m,
                "--features",
                "features.csv",
                "--split",
                split,
                "--seed",
                "5",
                "--out",
                &r,
            ],
            d,
        );
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    let o = har(
        &[
            "report",
            "--format",
            "pivot",
            "--out",
            "pivot.md",
            "--in",
            "svm-seen-report.json",
            "dnn-seen-report.json",
            "rf-unseen-report.json",
        ],
        d,
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let pivot = std::fs::read_to_string(d.join("pivot.md")).unwrap();
    assert_eq!(pivot.lines().count(), 2 + 3);
    assert!(pivot.contains("Shoaib (seen)") && pivot.contains("Shoaib (unseen)"));

    let o = har(
        &[
            "analyze",
            "corr",
            "--in",
            "records.csv",
            "--out",
            "corr.csv",
        ],
        d,
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let corr = std::fs::read_to_string(d.join("corr.csv")).unwrap();
    assert_eq!(corr.lines().next().unwrap(), ",ax,ay,az,gx,gy,gz,mx,my,mz");
    assert_eq!(corr.lines().count(), 10);

    let o = har(
        &["analyze", "pca", "--in", "features.csv", "--out", "pca.csv"],
        d,
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let pca = std::fs::read_to_string(d.join("pca.csv")).unwrap();
    assert_eq!(pca.lines().next().unwrap(), "pc1,pc2,activity");
    assert_eq!(pca.lines().count(), 65);

    let o = har(
        &[
            "analyze",
            "hist",
            "--in",
            "records.csv",
            "--columns",
            "ax,gy",
            "--bins",
            "20",
            "--activity",
            "walking",
            "--out",
            "hist.csv",
        ],
        d,
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(
        std::fs::read_to_string(d.join("hist.csv"))
            .unwrap()
            .lines()
            .count(),
        1 + 2 * 20
    );

    let o = har(
        &[
            "analyze",
            "corr",
            "--in",
            "records.csv",
            "--columns",
            "qq",
            "--out",
            "x.csv",
        ],
        d,
    );
    assert_eq!(o.status.code(), Some(2));
}

fn synthetic_layout(root: &Path, dataset: DatasetId) {
    let (channels, fs, activities) = match dataset {
        DatasetId::Wisdm => (
            ChannelSet::ACCEL,
            20.0,
            vec![
                ActivityProfile::walking(),
                ActivityProfile::running(),
                ActivityProfile::sitting(),
                ActivityProfile::standing(),
            ],
        ),
        DatasetId::Ucihar => (
            ChannelSet::ACCEL_GYRO,
            50.0,
            vec![
                ActivityProfile::walking(),
                ActivityProfile::walking_upstairs(),
                ActivityProfile::sitting(),
                ActivityProfile::standing(),
            ],
        ),
        DatasetId::Motionsense | DatasetId::Hhar => {
            (ChannelSet::ACCEL_GYRO, 50.0, ActivityProfile::six())
        }
        DatasetId::Shoaib => (ChannelSet::ALL, 50.0, ActivityProfile::six()),
    };
    let spec = SyntheticSpec {
        dataset_id: dataset,
        subjects: 3,
        activities,
        samples_per_session: 400,
        fs,
        channel_set: channels,
        subject_spread: 0.1,
        seed: 11,
    };
    write_layout(dataset, &generate_records(&spec), root).unwrap();
}

#[test]
fn table_config_emits_one_row_per_dataset_and_model() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    for ds in [
        DatasetId::Shoaib,
        DatasetId::Ucihar,
        DatasetId::Wisdm,
        DatasetId::Motionsense,
    ] {
        synthetic_layout(&d.join("data").join(ds.as_str()), ds);
    }
    std::fs::create_dir_all(d.join("pipelines")).unwrap();
    std::fs::copy(
        workspace().join("pipelines/table2.toml"),
        d.join("pipelines/table2.toml"),
    )
    .unwrap();
    let o = har(&["pipeline", "--config", "pipelines/table2.toml"], d);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let table = std::fs::read_to_string(d.join("pipelines/work/table2/table.md")).unwrap();
    let rows: Vec<&str> = table.lines().skip(2).collect();
    assert_eq!(rows.len(), 4 * 3, "{table}");
    for (i, ds) in ["Shoaib", "UCI HAR", "WISDM", "MotionSense"]
        .iter()
        .enumerate()
    {
        for (j, m) in ["SVM", "RF", "DNN"].iter().enumerate() {
            assert!(
                rows[3 * i + j].starts_with(&format!("| {ds} | {m} |")),
                "{}",
                rows[3 * i + j]
            );
        }
    }
}

#[test]
fn bundled_configs_parse() {
    let dir = tempfile::tempdir().unwrap();
    for cfg in ["fixture.toml", "table2.toml", "table3.toml", "cross.toml"] {
        let o = har(
            &[
                "pipeline",
                "--dry-run",
                "--config",
                workspace().join("pipelines").join(cfg).to_str().unwrap(),
            ],
            dir.path(),
        );
        // Dataset-backed configs stop at their missing inputs; the plan itself parses.
        let err = stderr(&o);
        assert!(
            o.status.code() == Some(0) || err.contains("missing input ../data/"),
            "{cfg}: {err}"
        );
    }
}
