//! End-to-end subcommand tests: the in-process entry point drives full
//! pipelines in temp directories, and the compiled binary checks exit
//! codes and stream contents.

use std::path::{Path, PathBuf};
use std::process::Command;

use sentiscore::cli::run;
use sentiscore::config::RunConfig;

fn run_ok(args: &[&str]) {
    let code = run(args.iter().map(|s| s.to_string()));
    assert_eq!(code, 0, "command failed: {args:?}");
}

/// Writes a small config sized for fast tests; returns (config path, out dir).
fn write_config(dir: &Path, extra: &str) -> (PathBuf, PathBuf) {
    let out = dir.join("artifacts");
    let path = dir.join("run.conf");
    let text = format!(
        "out = {}\n\
         corpus_size = 60\n\
         lexicon_size = 4\n\
         noise = 0.1\n\
         epochs = 2\n\
         batch_size = 16\n\
         seq_len = 12\n\
         embed_dim = 8\n\
         lstm_units = 6\n\
         max_vocab = 200\n\
         tune_epochs = 1\n\
         n_random = 2\n\
         n_bayes = 1\n\
         {extra}",
        out.display()
    );
    std::fs::write(&path, text).unwrap();
    (path, out)
}

fn binary() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sentiscore"))
}

#[test]
fn synth_train_evaluate_smoke_produces_all_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let (config, out) = write_config(dir.path(), "");
    let c = config.to_str().unwrap();

    run_ok(&["synth", "--config", c]);
    for name in ["synthetic.jsonl", "lexicon.tsv", "dictionary.txt"] {
        assert!(out.join(name).is_file(), "missing {name}");
    }

    run_ok(&["train", "--config", c]);
    for name in ["checkpoint.ssck", "history.csv", "vocab.txt"] {
        assert!(out.join(name).is_file(), "missing {name}");
    }
    let history = std::fs::read_to_string(out.join("history.csv")).unwrap();
    assert_eq!(history.lines().count(), 3, "header plus one row per epoch");
    assert!(history.starts_with("epoch,train_loss,train_mae,val_loss,val_mae\n"));

    run_ok(&["evaluate", "--config", c]);
    for name in [
        "metrics.txt",
        "hist_model.csv",
        "hist_baseline.csv",
        "hist_truth.csv",
    ] {
        assert!(out.join(name).is_file(), "missing {name}");
    }
    let metrics = std::fs::read_to_string(out.join("metrics.txt")).unwrap();
    assert!(metrics.contains("[model]"));
    assert!(metrics.contains("[baseline]"));
    assert!(metrics.contains("mae = "));
    assert!(!metrics.contains("NaN"), "metrics must be finite:\n{metrics}");
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (config, out) = write_config(dir.path(), "");
    let c = config.to_str().unwrap();

    run_ok(&["synth", "--config", c]);
    run_ok(&["train", "--config", c]);
    let corpus_a = std::fs::read(out.join("synthetic.jsonl")).unwrap();
    let ckpt_a = std::fs::read(out.join("checkpoint.ssck")).unwrap();
    let hist_a = std::fs::read(out.join("history.csv")).unwrap();

    run_ok(&["synth", "--config", c]);
    run_ok(&["train", "--config", c]);
    assert_eq!(corpus_a, std::fs::read(out.join("synthetic.jsonl")).unwrap());
    assert_eq!(ckpt_a, std::fs::read(out.join("checkpoint.ssck")).unwrap());
    assert_eq!(hist_a, std::fs::read(out.join("history.csv")).unwrap());
}

#[test]
fn seed_flag_changes_the_corpus() {
    let dir = tempfile::tempdir().unwrap();
    let (config, out) = write_config(dir.path(), "");
    let c = config.to_str().unwrap();
    run_ok(&["synth", "--config", c]);
    let default_seed = std::fs::read(out.join("synthetic.jsonl")).unwrap();
    run_ok(&["synth", "--config", c, "--seed", "7"]);
    let other_seed = std::fs::read(out.join("synthetic.jsonl")).unwrap();
    assert_ne!(default_seed, other_seed);
}

#[test]
fn clean_writes_the_cleaned_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("reviews.csv");
    std::fs::write(
        &data,
        "user_id,text,rating\n\
         u1,<b>很好</b>用,5\n\
         u1,<b>很好</b>用,5\n\
         u2,<br/>,3\n\
         u3,一般般,2.5\n",
    )
    .unwrap();
    let (config, out) = write_config(
        dir.path(),
        &format!("dataset = {}\n", data.display()),
    );
    run_ok(&["clean", "--config", config.to_str().unwrap()]);
    let cleaned = std::fs::read_to_string(out.join("cleaned.csv")).unwrap();
    // One duplicate and one empty-after-cleaning review drop out.
    assert_eq!(cleaned.lines().count(), 3, "header plus two reviews:\n{cleaned}");
    assert!(cleaned.contains("很好用"));
    assert!(!cleaned.contains("<b>"));
}

#[test]
fn vocab_exports_a_complete_coverage_curve() {
    let dir = tempfile::tempdir().unwrap();
    let (config, out) = write_config(dir.path(), "");
    let c = config.to_str().unwrap();
    run_ok(&["synth", "--config", c]);
    run_ok(&["vocab", "--config", c]);
    assert!(out.join("vocab.txt").is_file());
    let curve = std::fs::read_to_string(out.join("coverage.csv")).unwrap();
    let mut lines = curve.lines();
    assert_eq!(lines.next(), Some("vocab_size,coverage"));
    let last = lines.last().expect("curve rows");
    assert!(last.ends_with(",1"), "terminal coverage must be 1: {last}");
}

#[test]
fn baseline_artifact_is_reused_by_evaluate() {
    let dir = tempfile::tempdir().unwrap();
    let (config, out) = write_config(dir.path(), "");
    let c = config.to_str().unwrap();
    run_ok(&["synth", "--config", c]);
    run_ok(&["train", "--config", c]);
    run_ok(&["baseline", "--config", c]);
    assert!(out.join("baseline.txt").is_file());
    run_ok(&["evaluate", "--config", c]);
    let metrics = std::fs::read_to_string(out.join("metrics.txt")).unwrap();
    assert!(metrics.contains("[baseline]"));
}

#[test]
fn compare_exports_exactly_the_eight_table_rows() {
    let dir = tempfile::tempdir().unwrap();
    let (config, out) = write_config(dir.path(), "");
    let c = config.to_str().unwrap();
    run_ok(&["synth", "--config", c]);
    run_ok(&["train", "--config", c]);
    run_ok(&["compare", "--config", c]);
    let table = std::fs::read_to_string(out.join("compare.csv")).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines[0], "metric,bilstm,baseline");
    let names: Vec<&str> = lines[1..]
        .iter()
        .map(|l| l.split(',').next().unwrap())
        .collect();
    assert_eq!(
        names,
        ["mse", "rmse", "mae", "mape", "msle", "medae", "r2", "evs"]
    );
}

#[test]
fn tune_writes_trials_and_a_loadable_best_config() {
    let dir = tempfile::tempdir().unwrap();
    let (config, out) = write_config(dir.path(), "");
    let c = config.to_str().unwrap();
    run_ok(&["synth", "--config", c]);
    run_ok(&["tune", "--config", c]);

    let trials = std::fs::read_to_string(out.join("trials.csv")).unwrap();
    let lines: Vec<&str> = trials.lines().collect();
    assert_eq!(
        lines[0],
        "trial,phase,learning_rate,lstm_units,dropout_rate,val_mae"
    );
    assert_eq!(lines.len(), 4, "header plus 2 random + 1 surrogate trials");

    let best_path = out.join("best_config.txt");
    let best = RunConfig::load(&best_path).unwrap();
    assert!(best.learning_rate >= 1e-4 && best.learning_rate <= 1e-2);
    assert!((32..=128).contains(&best.lstm_units));
    assert!(best.dropout_rate >= 0.2 && best.dropout_rate <= 0.6);

    // The emitted file is directly usable to retrain.
    run_ok(&["train", "--config", best_path.to_str().unwrap()]);
    assert!(out.join("checkpoint.ssck").is_file());
}

#[test]
fn evaluate_rejects_a_checkpoint_from_another_seed() {
    let dir = tempfile::tempdir().unwrap();
    let (config, _) = write_config(dir.path(), "");
    let c = config.to_str().unwrap();
    run_ok(&["synth", "--config", c]);
    run_ok(&["train", "--config", c]);
    let code = run(
        ["evaluate", "--config", c, "--seed", "99"]
            .iter()
            .map(|s| s.to_string()),
    );
    assert_eq!(code, 1, "digest mismatch must fail");
}

#[test]
fn predict_scores_texts_from_flags_and_files() {
    let dir = tempfile::tempdir().unwrap();
    let (config, out) = write_config(dir.path(), "");
    let c = config.to_str().unwrap();
    run_ok(&["synth", "--config", c]);
    run_ok(&["train", "--config", c]);

    let dictionary = std::fs::read_to_string(out.join("dictionary.txt")).unwrap();
    let word = dictionary.lines().next().unwrap().to_string();
    let input = dir.path().join("texts.txt");
    std::fs::write(&input, format!("{word}\n\n{word}{word}\n")).unwrap();

    let output = binary()
        .args([
            "predict",
            "--config",
            c,
            "--input",
            input.to_str().unwrap(),
            "--text",
            &word,
            "--text",
            "<br/>",
        ])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(0), "{output:?}");
    let stdout = String::from_utf8(output.stdout).unwrap();
    let lines: Vec<&str> = stdout.lines().collect();
    assert_eq!(lines.len(), 4, "two file texts plus two flag texts:\n{stdout}");
    for line in &lines[..3] {
        let (_, score) = line.split_once('\t').unwrap();
        let value: f64 = score.parse().unwrap();
        assert!((0.0..=5.0).contains(&value), "score out of range: {line}");
    }
    // Markup-only text cleans to nothing: reported per-item, not fatal.
    assert!(lines[3].contains("error"), "{stdout}");
}

#[test]
fn unknown_subcommand_prints_usage_and_exits_2() {
    let output = binary().arg("frobnicate").output().unwrap();
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.to_lowercase().contains("usage"), "{stderr}");
}

#[test]
fn missing_dataset_fails_with_one_error_line_naming_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let output = binary()
        .args(["train", "--out", dir.path().to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert_eq!(stderr.lines().count(), 1, "one machine-readable line: {stderr}");
    assert!(stderr.starts_with("error: "), "{stderr}");
    assert!(stderr.contains("synthetic.jsonl"), "{stderr}");
}

#[test]
fn help_lists_every_subcommand() {
    let output = binary().arg("--help").output().unwrap();
    assert_eq!(output.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&output.stdout);
    for name in [
        "clean", "vocab", "train", "tune", "evaluate", "predict", "baseline", "synth", "compare",
    ] {
        assert!(stdout.contains(name), "help must list {name}");
    }
}
