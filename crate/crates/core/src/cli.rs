//! Operator surface: `sentiscore <subcommand> --config <path> [--seed N]
//! [--out DIR]`.
//!
//! Nine subcommands cover the pipeline: `clean`, `vocab`, `train`, `tune`,
//! `evaluate`, `predict`, `baseline`, `synth`, `compare`. Each writes its
//! artifacts under the output directory with fixed names (`history.csv`,
//! `trials.csv`, `coverage.csv`, `metrics.txt`, `hist_model.csv`,
//! `hist_baseline.csv`, `hist_truth.csv`, `checkpoint.ssck`, `vocab.txt`,
//! `baseline.txt`, `best_config.txt`, `compare.csv`, `cleaned.*`, and the
//! `synth` trio `synthetic.jsonl`, `lexicon.tsv`, `dictionary.txt`).
//! Re-running a subcommand on identical inputs and seed rewrites each
//! artifact byte for byte: all randomness flows from the master seed
//! through fixed per-module stream tags, and all exports use
//! deterministic number formatting.
//!
//! Plot data is exported as comma-separated files, never images; any
//! plotting tool can consume them. Failures exit nonzero after printing a
//! single `error: ...` line on standard error.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::baseline::{load_baseline, score_baseline, train_baseline, NBModel};
use crate::config::RunConfig;
use crate::corpus::{
    clean_dataset, load_dataset, write_dataset, CleanReview, CleanStats, Format, RawReview,
};
use crate::hypertune::{optimize, trial_csv_row, HyperParams, TRIALS_HEADER};
use crate::metrics::{compute_metrics, histogram, MetricsReport};
use crate::nnet::{forward_eval, ModelConfig};
use crate::rng::{derive_seed, tags};
use crate::synth::{generate_synthetic_corpus, write_dictionary, write_lexicon};
use crate::textprep::{
    build_vocab, coverage_curve, denormalize, min_vocab_for_coverage, Preprocessor, Vocabulary,
};
use crate::trainer::{
    encode_dataset, load_checkpoint, predict, save_checkpoint, score_from_raw, split_dataset,
    train, train_with_observer, Checkpoint, TrainConfig,
};
use crate::{Error, Result};

#[derive(Parser, Debug)]
#[command(
    name = "sentiscore",
    version,
    about = "Sentiment scoring for Chinese product reviews: a BiLSTM regressor \
             with a naive-Bayes reference scorer"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Clean the dataset: strip markup, deduplicate, drop empty reviews.
    Clean(CommonArgs),
    /// Build the vocabulary and export the corpus coverage curve.
    Vocab(CommonArgs),
    /// Train the BiLSTM regressor; writes checkpoint, vocabulary, history.
    Train(CommonArgs),
    /// Search learning rate, hidden units, and dropout with model-guided trials.
    Tune(CommonArgs),
    /// Score the held-out split with the model and baseline; export metrics.
    Evaluate(CommonArgs),
    /// Score ad-hoc texts with a trained checkpoint.
    Predict(PredictArgs),
    /// Train the naive-Bayes reference scorer on the training split.
    Baseline(CommonArgs),
    /// Generate a synthetic labeled corpus with a planted sentiment lexicon.
    Synth(CommonArgs),
    /// Print a side-by-side metric table: BiLSTM vs baseline.
    Compare(CommonArgs),
}

#[derive(Args, Debug)]
struct CommonArgs {
    /// Run configuration file; documented defaults apply when omitted.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Master seed override.
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// Output directory override.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct PredictArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// A text to score; repeat the flag to score several.
    #[arg(long = "text", value_name = "TEXT")]
    texts: Vec<String>,
    /// File with one text per line (blank lines are skipped).
    #[arg(long, value_name = "FILE")]
    input: Option<PathBuf>,
}

/// Runs the CLI on an argument list (without the program name) and returns
/// the process exit code: 0 on success, 1 on pipeline errors, 2 on usage
/// errors.
pub fn run<I: IntoIterator<Item = String>>(argv: I) -> i32 {
    let argv = std::iter::once("sentiscore".to_string()).chain(argv);
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            if e.use_stderr() {
                eprint!("{e}");
                return 2;
            }
            // --help and --version land here and are not errors.
            print!("{e}");
            return 0;
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Clean(args) => cmd_clean(&resolve_config(&args)?),
        Command::Vocab(args) => cmd_vocab(&resolve_config(&args)?),
        Command::Train(args) => cmd_train(&resolve_config(&args)?),
        Command::Tune(args) => cmd_tune(&resolve_config(&args)?),
        Command::Evaluate(args) => cmd_evaluate(&resolve_config(&args)?),
        Command::Predict(args) => {
            let config = resolve_config(&args.common)?;
            cmd_predict(&config, &args)
        }
        Command::Baseline(args) => cmd_baseline(&resolve_config(&args)?),
        Command::Synth(args) => cmd_synth(&resolve_config(&args)?),
        Command::Compare(args) => cmd_compare(&resolve_config(&args)?),
    }
}

/// Loads the config file (or defaults) and applies flag overrides.
fn resolve_config(args: &CommonArgs) -> Result<RunConfig> {
    let mut config = match &args.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(out) = &args.out {
        config.out_dir = out.clone();
    }
    Ok(config)
}

fn artifact(config: &RunConfig, name: &str) -> PathBuf {
    config.out_dir.join(name)
}

/// Like [`artifact`] but the file must already exist; `hint` tells the
/// operator which subcommand produces it.
fn require_artifact(config: &RunConfig, name: &str, hint: &str) -> Result<PathBuf> {
    let path = artifact(config, name);
    if !path.is_file() {
        return Err(Error::Config(format!(
            "{} does not exist ({hint})",
            path.display()
        )));
    }
    Ok(path)
}

fn ensure_out_dir(config: &RunConfig) -> Result<()> {
    std::fs::create_dir_all(&config.out_dir).map_err(|e| {
        Error::Config(format!(
            "cannot create output directory {}: {e}",
            config.out_dir.display()
        ))
    })
}

/// Loads and cleans the configured dataset.
fn load_clean(config: &RunConfig) -> Result<(Vec<CleanReview>, CleanStats)> {
    let path = config.dataset_path_checked()?;
    let format = config.dataset_format(&path)?;
    let raw = load_dataset(&path, format)?;
    let (clean, stats) = clean_dataset(raw);
    if clean.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "no reviews in {} survived cleaning",
            path.display()
        )));
    }
    Ok((clean, stats))
}

/// The shared front half of every model-facing subcommand: clean the
/// dataset, build the tokenizer, and split deterministically. The split
/// stream is derived from the master seed, so every subcommand sees the
/// same partition.
fn split_clean(config: &RunConfig) -> Result<(Preprocessor, Vec<CleanReview>, Vec<CleanReview>)> {
    let (clean, _) = load_clean(config)?;
    let pre = config.preprocessor()?;
    let (train_reviews, val_reviews) = split_dataset(
        &clean,
        config.split_fraction,
        derive_seed(config.seed, tags::SPLIT),
    )?;
    Ok((pre, train_reviews, val_reviews))
}

/// Tokenizes the training split and builds the capped vocabulary from it.
/// Only the training split feeds the vocabulary so the held-out reviews
/// stay unseen.
fn build_train_vocab(
    config: &RunConfig,
    pre: &Preprocessor,
    train_reviews: &[CleanReview],
) -> Result<(Vocabulary, Vec<Vec<String>>)> {
    let token_lists: Vec<Vec<String>> = train_reviews.iter().map(|r| pre.tokens(&r.text)).collect();
    let vocab = build_vocab(&token_lists, config.max_vocab)?;
    Ok((vocab, token_lists))
}

fn cmd_clean(config: &RunConfig) -> Result<()> {
    ensure_out_dir(config)?;
    let path = config.dataset_path_checked()?;
    let format = config.dataset_format(&path)?;
    let raw = load_dataset(&path, format)?;
    let (clean, stats) = clean_dataset(raw);
    let name = match format {
        Format::Delimited => "cleaned.csv",
        Format::RecordPerLine => "cleaned.jsonl",
    };
    let as_raw: Vec<RawReview> = clean
        .iter()
        .map(|r| RawReview {
            user_id: r.user_id.clone(),
            text: r.text.clone(),
            rating: r.rating,
        })
        .collect();
    let out_path = artifact(config, name);
    write_dataset(&out_path, &as_raw, format)?;
    println!(
        "kept {} of {} reviews ({} duplicates, {} empty dropped) -> {}",
        clean.len(),
        stats.input,
        stats.dropped_duplicates,
        stats.dropped_empty,
        out_path.display()
    );
    Ok(())
}

fn cmd_vocab(config: &RunConfig) -> Result<()> {
    ensure_out_dir(config)?;
    let (pre, train_reviews, _) = split_clean(config)?;
    let (vocab, token_lists) = build_train_vocab(config, &pre, &train_reviews)?;
    let vocab_path = artifact(config, "vocab.txt");
    vocab.save(&vocab_path)?;

    // Coverage statistics use the full (uncapped) frequency spectrum, so
    // they describe the corpus rather than the truncated vocabulary.
    let mut counts: HashMap<&str, u64> = HashMap::new();
    for tokens in &token_lists {
        for token in tokens {
            *counts.entry(token.as_str()).or_insert(0) += 1;
        }
    }
    let mut frequencies: Vec<u64> = counts.into_values().collect();
    frequencies.sort_unstable_by(|a, b| b.cmp(a));
    let curve = coverage_curve(&frequencies)?;
    let curve_path = artifact(config, "coverage.csv");
    let mut file = BufWriter::new(File::create(&curve_path)?);
    writeln!(file, "vocab_size,coverage")?;
    for (size, cov) in &curve {
        writeln!(file, "{size},{cov}")?;
    }
    file.flush()?;
    let needed = min_vocab_for_coverage(&frequencies, config.coverage)?;

    println!(
        "vocabulary {} ids ({} content tokens, cap {}) -> {}",
        vocab.size(),
        vocab.size() - 2,
        config.max_vocab,
        vocab_path.display()
    );
    println!(
        "{} most frequent tokens cover {:.1}% of the training split; curve -> {}",
        needed,
        config.coverage * 100.0,
        curve_path.display()
    );
    Ok(())
}

fn cmd_train(config: &RunConfig) -> Result<()> {
    ensure_out_dir(config)?;
    let (pre, train_reviews, val_reviews) = split_clean(config)?;
    let (vocab, _) = build_train_vocab(config, &pre, &train_reviews)?;
    let (train_set, train_stats) = encode_dataset(&train_reviews, &pre, &vocab, config.seq_len)?;
    let (val_set, val_stats) = encode_dataset(&val_reviews, &pre, &vocab, config.seq_len)?;
    let dropped = train_stats.dropped_empty + val_stats.dropped_empty;
    if dropped > 0 {
        println!("dropped {dropped} reviews with no tokens");
    }
    let train_config = config.train_config(vocab.size());
    train_config.validate()?;
    vocab.save(&artifact(config, "vocab.txt"))?;

    // The history file is streamed one row per epoch so a crashed run
    // still leaves a usable learning curve.
    let history_path = artifact(config, "history.csv");
    let mut history_file = BufWriter::new(File::create(&history_path)?);
    writeln!(history_file, "epoch,train_loss,train_mae,val_loss,val_mae")?;
    let total = train_config.epochs;
    let (params, _) = train_with_observer(&train_set, &val_set, &train_config, |r| {
        writeln!(
            history_file,
            "{},{},{},{},{}",
            r.epoch, r.train_loss, r.train_mae, r.val_loss, r.val_mae
        )?;
        history_file.flush()?;
        println!(
            "epoch {}/{}: train_loss {:.6} train_mae {:.6} val_loss {:.6} val_mae {:.6}",
            r.epoch, total, r.train_loss, r.train_mae, r.val_loss, r.val_mae
        );
        Ok(())
    })?;
    history_file.flush()?;
    drop(history_file);

    let ckpt = Checkpoint::new(
        config.seed,
        train_config.digest(),
        vocab.digest(),
        params,
    );
    let ckpt_path = artifact(config, "checkpoint.ssck");
    save_checkpoint(&ckpt_path, &ckpt)?;
    println!(
        "trained {} epochs on {} reviews ({} held out) -> {}",
        total,
        train_set.len(),
        val_set.len(),
        ckpt_path.display()
    );
    Ok(())
}

fn cmd_tune(config: &RunConfig) -> Result<()> {
    ensure_out_dir(config)?;
    let (pre, train_reviews, val_reviews) = split_clean(config)?;
    let (vocab, _) = build_train_vocab(config, &pre, &train_reviews)?;
    let (train_set, _) = encode_dataset(&train_reviews, &pre, &vocab, config.seq_len)?;
    let (val_set, _) = encode_dataset(&val_reviews, &pre, &vocab, config.seq_len)?;

    let trials_path = artifact(config, "trials.csv");
    let mut trials_file = BufWriter::new(File::create(&trials_path)?);
    writeln!(trials_file, "{TRIALS_HEADER}")?;
    trials_file.flush()?;

    let objective = |hp: &HyperParams| -> Result<f64> {
        let trial_config = TrainConfig {
            epochs: config.tune_epochs,
            batch_size: config.batch_size,
            split_fraction: config.split_fraction,
            seed: config.seed,
            learning_rate: hp.learning_rate,
            model: ModelConfig {
                vocab_size: vocab.size(),
                embed_dim: config.embed_dim,
                lstm_units: hp.lstm_units,
                dropout_rate: hp.dropout_rate,
                seq_len: config.seq_len,
            },
        };
        let (_, history) = train(&train_set, &val_set, &trial_config)?;
        Ok(history.last().map_or(f64::INFINITY, |r| r.val_mae))
    };
    let observer = |t: &crate::hypertune::Trial| -> Result<()> {
        writeln!(trials_file, "{}", trial_csv_row(t))?;
        trials_file.flush()?;
        println!(
            "trial {} [{}]: lr {:.6} units {} dropout {:.3} -> val_mae {:.6}{}",
            t.index,
            t.phase,
            t.config.learning_rate,
            t.config.lstm_units,
            t.config.dropout_rate,
            t.objective,
            if t.failed { " (failed)" } else { "" }
        );
        Ok(())
    };
    let (best, trials) = optimize(
        config.n_random,
        config.n_bayes,
        derive_seed(config.seed, tags::TUNE),
        objective,
        observer,
    )?;
    drop(trials_file);

    let tuned = RunConfig {
        learning_rate: best.config.learning_rate,
        lstm_units: best.config.lstm_units,
        dropout_rate: best.config.dropout_rate,
        ..config.clone()
    };
    let best_path = artifact(config, "best_config.txt");
    let text = format!(
        "# best of {} trials (trial {}, validation MAE {:.6}); usable as --config\n{}",
        trials.len(),
        best.index,
        best.objective,
        tuned.to_text()
    );
    std::fs::write(&best_path, text)?;
    println!(
        "best trial {}: lr {:.6} units {} dropout {:.3} (val_mae {:.6}) -> {}",
        best.index,
        best.config.learning_rate,
        best.config.lstm_units,
        best.config.dropout_rate,
        best.objective,
        best_path.display()
    );
    Ok(())
}

/// Both scorers applied to the held-out split. The BiLSTM consumes encoded
/// sequences (reviews with no tokens are dropped by encoding); the
/// baseline scores every held-out review directly.
struct Scored {
    model_truth: Vec<f64>,
    model_preds: Vec<f64>,
    nb_truth: Vec<f64>,
    nb_preds: Vec<f64>,
    model_report: MetricsReport,
    nb_report: MetricsReport,
}

fn score_heldout(config: &RunConfig) -> Result<Scored> {
    let (pre, train_reviews, val_reviews) = split_clean(config)?;
    let ckpt_path = require_artifact(config, "checkpoint.ssck", "run `sentiscore train` first")?;
    let vocab_path = require_artifact(config, "vocab.txt", "run `sentiscore train` first")?;
    let ckpt = load_checkpoint(&ckpt_path)?;
    let vocab = Vocabulary::load(&vocab_path)?;
    ckpt.require_vocab(&vocab)?;
    let expected = config.train_config(vocab.size());
    if ckpt.train_digest != expected.digest() {
        return Err(Error::Checkpoint(
            "checkpoint was trained under a different configuration or seed; \
             rerun with the training config so the held-out split matches"
                .into(),
        ));
    }

    let (val_set, _) = encode_dataset(&val_reviews, &pre, &vocab, ckpt.model.seq_len)?;
    let refs: Vec<&[usize]> = val_set.iter().map(|e| e.ids.as_slice()).collect();
    let mut model_preds = Vec::with_capacity(val_set.len());
    for chunk in refs.chunks(config.batch_size.max(1)) {
        let raw: Vec<f32> = forward_eval(chunk, &ckpt.params)?;
        model_preds.extend(raw.iter().map(|&p| score_from_raw(f64::from(p))));
    }
    let model_truth: Vec<f64> = val_set
        .iter()
        .map(|e| denormalize(f64::from(e.label)))
        .collect();

    let nb = load_or_train_baseline(config, &train_reviews, &pre)?;
    let nb_preds: Vec<f64> = val_reviews
        .iter()
        .map(|r| score_baseline(&r.text, &nb, &pre))
        .collect();
    let nb_truth: Vec<f64> = val_reviews.iter().map(|r| r.rating).collect();

    let model_report = compute_metrics(&model_truth, &model_preds)?;
    let nb_report = compute_metrics(&nb_truth, &nb_preds)?;
    Ok(Scored {
        model_truth,
        model_preds,
        nb_truth,
        nb_preds,
        model_report,
        nb_report,
    })
}

/// Reuses a saved baseline model when present; otherwise trains one in
/// memory on the same training split `sentiscore baseline` would use.
fn load_or_train_baseline(
    config: &RunConfig,
    train_reviews: &[CleanReview],
    pre: &Preprocessor,
) -> Result<NBModel> {
    let path = artifact(config, "baseline.txt");
    if path.is_file() {
        load_baseline(&path)
    } else {
        train_baseline(train_reviews, pre)
    }
}

fn cmd_evaluate(config: &RunConfig) -> Result<()> {
    ensure_out_dir(config)?;
    let scored = score_heldout(config)?;
    let metrics_path = artifact(config, "metrics.txt");
    let text = format!(
        "[model]\n{}\n[baseline]\n{}",
        scored.model_report.to_text(),
        scored.nb_report.to_text()
    );
    std::fs::write(&metrics_path, text)?;

    const BINS: usize = 10;
    histogram(&scored.model_preds, BINS, 0.0, 5.0)?
        .write_csv(&artifact(config, "hist_model.csv"))?;
    histogram(&scored.nb_preds, BINS, 0.0, 5.0)?
        .write_csv(&artifact(config, "hist_baseline.csv"))?;
    histogram(&scored.nb_truth, BINS, 0.0, 5.0)?
        .write_csv(&artifact(config, "hist_truth.csv"))?;

    println!(
        "model: {} reviews, MAE {:.4}, RMSE {:.4}",
        scored.model_truth.len(),
        scored.model_report.mae,
        scored.model_report.rmse
    );
    println!(
        "baseline: {} reviews, MAE {:.4}, RMSE {:.4}",
        scored.nb_truth.len(),
        scored.nb_report.mae,
        scored.nb_report.rmse
    );
    println!(
        "metrics -> {}; histograms -> hist_model.csv hist_baseline.csv hist_truth.csv",
        metrics_path.display()
    );
    Ok(())
}

/// The eight metric rows shared by `compare`'s table and CSV export.
fn metric_rows(model: &MetricsReport, nb: &MetricsReport) -> Vec<(&'static str, String, String)> {
    fn fmt(v: f64) -> String {
        format!("{v:.6}")
    }
    fn fmt_opt(v: Option<f64>) -> String {
        v.map_or_else(|| "undefined".to_string(), fmt)
    }
    vec![
        ("mse", fmt(model.mse), fmt(nb.mse)),
        ("rmse", fmt(model.rmse), fmt(nb.rmse)),
        ("mae", fmt(model.mae), fmt(nb.mae)),
        ("mape", fmt_opt(model.mape), fmt_opt(nb.mape)),
        ("msle", fmt(model.msle), fmt(nb.msle)),
        ("medae", fmt(model.medae), fmt(nb.medae)),
        ("r2", fmt_opt(model.r2), fmt_opt(nb.r2)),
        ("evs", fmt_opt(model.evs), fmt_opt(nb.evs)),
    ]
}

fn cmd_compare(config: &RunConfig) -> Result<()> {
    ensure_out_dir(config)?;
    let scored = score_heldout(config)?;
    let rows = metric_rows(&scored.model_report, &scored.nb_report);

    let csv_path = artifact(config, "compare.csv");
    let mut file = BufWriter::new(File::create(&csv_path)?);
    writeln!(file, "metric,bilstm,baseline")?;
    for (name, model_value, nb_value) in &rows {
        writeln!(file, "{name},{model_value},{nb_value}")?;
    }
    file.flush()?;

    println!("{:<8}{:>14}{:>14}", "metric", "bilstm", "baseline");
    for (name, model_value, nb_value) in &rows {
        println!("{name:<8}{model_value:>14}{nb_value:>14}");
    }
    println!("table -> {}", csv_path.display());
    Ok(())
}

fn cmd_predict(config: &RunConfig, args: &PredictArgs) -> Result<()> {
    let mut texts: Vec<String> = Vec::new();
    if let Some(path) = &args.input {
        let content = std::fs::read_to_string(path).map_err(|e| {
            Error::Config(format!("cannot read input {}: {e}", path.display()))
        })?;
        texts.extend(content.lines().filter(|l| !l.trim().is_empty()).map(String::from));
    }
    texts.extend(args.texts.iter().cloned());
    if texts.is_empty() {
        return Err(Error::InvalidArgument(
            "no texts to score; pass --text or --input".into(),
        ));
    }

    let ckpt_path = require_artifact(config, "checkpoint.ssck", "run `sentiscore train` first")?;
    let vocab_path = require_artifact(config, "vocab.txt", "run `sentiscore train` first")?;
    let ckpt = load_checkpoint(&ckpt_path)?;
    let vocab = Vocabulary::load(&vocab_path)?;
    ckpt.require_vocab(&vocab)?;
    let pre = config.preprocessor()?;
    let scores = predict(&texts, &ckpt.params, &vocab, &pre)?;
    for (i, score) in scores.iter().enumerate() {
        match score {
            Ok(value) => println!("{}\t{value:.4}", i + 1),
            Err(e) => println!("{}\terror: {e}", i + 1),
        }
    }
    Ok(())
}

fn cmd_baseline(config: &RunConfig) -> Result<()> {
    ensure_out_dir(config)?;
    let (pre, train_reviews, _) = split_clean(config)?;
    let model = train_baseline(&train_reviews, &pre)?;
    let path = artifact(config, "baseline.txt");
    crate::baseline::save_baseline(&path, &model)?;
    println!(
        "baseline trained on {} reviews ({} token types) -> {}",
        train_reviews.len(),
        model.vocab_len(),
        path.display()
    );
    Ok(())
}

fn cmd_synth(config: &RunConfig) -> Result<()> {
    ensure_out_dir(config)?;
    let corpus = generate_synthetic_corpus(
        &config.synth_params(),
        derive_seed(config.seed, tags::SYNTH),
    )?;
    let data_path = artifact(config, "synthetic.jsonl");
    write_dataset(&data_path, &corpus.reviews, Format::RecordPerLine)?;
    write_lexicon(artifact(config, "lexicon.tsv"), &corpus.lexicon)?;
    write_dictionary(artifact(config, "dictionary.txt"), &corpus.lexicon)?;
    println!(
        "generated {} reviews with a {}-entry lexicon -> {}",
        corpus.reviews.len(),
        corpus.lexicon.len(),
        data_path.display()
    );
    Ok(())
}
