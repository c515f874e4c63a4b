//! Run configuration: one flat key-value text file drives every subcommand.
//!
//! Format: one `key = value` pair per line. Blank lines and lines starting
//! with `#` are ignored; whitespace around keys and values is trimmed.
//! Unknown and duplicate keys are errors so typos fail loudly. Every key is
//! optional and falls back to the documented default.
//!
//! | key              | default   | meaning                                     |
//! |------------------|-----------|---------------------------------------------|
//! | `dataset`        | see below | input reviews (CSV or JSONL)                |
//! | `format`         | `auto`    | `csv`, `jsonl`, or `auto` (by extension)    |
//! | `dictionary`     | see below | segmentation dictionary, one word per line  |
//! | `stoplist`       | none      | stopword list, one word per line            |
//! | `out`            | `out`     | output directory for all artifacts          |
//! | `seed`           | `42`      | master seed; submodule streams derive from it |
//! | `epochs`         | `100`     | training epochs                             |
//! | `batch_size`     | `64`      | minibatch size                              |
//! | `split_fraction` | `0.8`     | train share of the train/validation split   |
//! | `learning_rate`  | `0.005358`| Adam step size                              |
//! | `embed_dim`      | `128`     | embedding width                             |
//! | `lstm_units`     | `52`      | hidden units per LSTM direction             |
//! | `dropout_rate`   | `0.2`     | dropout on the concatenated feature         |
//! | `seq_len`        | `100`     | padded/truncated sequence length            |
//! | `max_vocab`      | `4000`    | cap on content tokens in the vocabulary     |
//! | `coverage`       | `0.95`    | target corpus coverage for `vocab`          |
//! | `n_random`       | `5`       | random trials before the surrogate phase    |
//! | `n_bayes`        | `15`      | surrogate-guided trials                     |
//! | `tune_epochs`    | `15`      | epochs per tuning trial                     |
//! | `corpus_size`    | `2000`    | reviews generated by `synth`                |
//! | `lexicon_size`   | `12`      | planted positive (and negative) word count  |
//! | `noise`          | `0.25`    | rating noise sigma for `synth`              |
//!
//! Unset paths resolve against the output directory so the default
//! `synth` -> `train` -> `evaluate` flow needs no config file at all:
//! `dataset` falls back to `<out>/synthetic.jsonl`, and `dictionary` falls
//! back to `<out>/dictionary.txt` when that file exists (otherwise
//! segmentation runs dictionary-free, one character per token).

use std::path::{Path, PathBuf};

use crate::corpus::Format;
use crate::nnet::ModelConfig;
use crate::synth::SynthParams;
use crate::textprep::{Dictionary, Preprocessor, Stoplist};
use crate::trainer::TrainConfig;
use crate::{Error, Result};

/// Master seed used when the config file and `--seed` both leave it unset.
pub const DEFAULT_SEED: u64 = 42;

/// Parsed run configuration. See the module docs for key semantics.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub dataset: Option<PathBuf>,
    pub format: String,
    pub dictionary: Option<PathBuf>,
    pub stoplist: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub seed: u64,
    pub epochs: usize,
    pub batch_size: usize,
    pub split_fraction: f64,
    pub learning_rate: f64,
    pub embed_dim: usize,
    pub lstm_units: usize,
    pub dropout_rate: f64,
    pub seq_len: usize,
    pub max_vocab: usize,
    pub coverage: f64,
    pub n_random: usize,
    pub n_bayes: usize,
    pub tune_epochs: usize,
    pub corpus_size: usize,
    pub lexicon_size: usize,
    pub noise: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            dataset: None,
            format: "auto".to_string(),
            dictionary: None,
            stoplist: None,
            out_dir: PathBuf::from("out"),
            seed: DEFAULT_SEED,
            epochs: 100,
            batch_size: 64,
            split_fraction: 0.8,
            learning_rate: 0.005358,
            embed_dim: 128,
            lstm_units: 52,
            dropout_rate: 0.2,
            seq_len: 100,
            max_vocab: 4000,
            coverage: 0.95,
            n_random: 5,
            n_bayes: 15,
            tune_epochs: 15,
            corpus_size: 2000,
            lexicon_size: 12,
            noise: 0.25,
        }
    }
}

fn parse_value<T>(key: &str, value: &str, origin: &str, line: usize) -> Result<T>
where
    T: std::str::FromStr,
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e| Error::Parse {
        path: origin.to_string(),
        line,
        msg: format!("bad value {value:?} for {key}: {e}"),
    })
}

impl RunConfig {
    /// Parses config text. `origin` names the source in error messages.
    pub fn from_text(text: &str, origin: &str) -> Result<RunConfig> {
        let mut config = RunConfig::default();
        let mut seen: Vec<String> = Vec::new();
        for (idx, raw_line) in text.lines().enumerate() {
            let line = idx + 1;
            let trimmed = raw_line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let Some((key, value)) = trimmed.split_once('=') else {
                return Err(Error::Parse {
                    path: origin.to_string(),
                    line,
                    msg: format!("expected key = value, got {trimmed:?}"),
                });
            };
            let key = key.trim();
            let value = value.trim();
            if value.is_empty() {
                return Err(Error::Parse {
                    path: origin.to_string(),
                    line,
                    msg: format!("empty value for {key}"),
                });
            }
            if seen.iter().any(|s| s == key) {
                return Err(Error::Parse {
                    path: origin.to_string(),
                    line,
                    msg: format!("duplicate key {key}"),
                });
            }
            seen.push(key.to_string());
            match key {
                "dataset" => config.dataset = Some(PathBuf::from(value)),
                "format" => config.format = value.to_string(),
                "dictionary" => config.dictionary = Some(PathBuf::from(value)),
                "stoplist" => config.stoplist = Some(PathBuf::from(value)),
                "out" => config.out_dir = PathBuf::from(value),
                "seed" => config.seed = parse_value(key, value, origin, line)?,
                "epochs" => config.epochs = parse_value(key, value, origin, line)?,
                "batch_size" => config.batch_size = parse_value(key, value, origin, line)?,
                "split_fraction" => {
                    config.split_fraction = parse_value(key, value, origin, line)?;
                }
                "learning_rate" => {
                    config.learning_rate = parse_value(key, value, origin, line)?;
                }
                "embed_dim" => config.embed_dim = parse_value(key, value, origin, line)?,
                "lstm_units" => config.lstm_units = parse_value(key, value, origin, line)?,
                "dropout_rate" => config.dropout_rate = parse_value(key, value, origin, line)?,
                "seq_len" => config.seq_len = parse_value(key, value, origin, line)?,
                "max_vocab" => config.max_vocab = parse_value(key, value, origin, line)?,
                "coverage" => config.coverage = parse_value(key, value, origin, line)?,
                "n_random" => config.n_random = parse_value(key, value, origin, line)?,
                "n_bayes" => config.n_bayes = parse_value(key, value, origin, line)?,
                "tune_epochs" => config.tune_epochs = parse_value(key, value, origin, line)?,
                "corpus_size" => config.corpus_size = parse_value(key, value, origin, line)?,
                "lexicon_size" => config.lexicon_size = parse_value(key, value, origin, line)?,
                "noise" => config.noise = parse_value(key, value, origin, line)?,
                other => {
                    return Err(Error::Parse {
                        path: origin.to_string(),
                        line,
                        msg: format!("unknown key {other}"),
                    });
                }
            }
        }
        config.validate()?;
        Ok(config)
    }

    /// Loads and parses a config file.
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::Config(format!("cannot read config {}: {e}", path.display()))
        })?;
        RunConfig::from_text(&text, &path.display().to_string())
    }

    /// Range checks for every key. Runs after parsing, so a config file is
    /// rejected as a whole even if the current subcommand would not touch
    /// the offending key.
    pub fn validate(&self) -> Result<()> {
        fn check(ok: bool, msg: &str) -> Result<()> {
            if ok {
                Ok(())
            } else {
                Err(Error::Config(msg.to_string()))
            }
        }
        check(self.epochs >= 1, "epochs must be at least 1")?;
        check(self.batch_size >= 1, "batch_size must be at least 1")?;
        check(
            self.split_fraction > 0.0 && self.split_fraction < 1.0,
            "split_fraction must be strictly between 0 and 1",
        )?;
        check(
            self.learning_rate.is_finite() && self.learning_rate > 0.0,
            "learning_rate must be a positive finite number",
        )?;
        check(self.embed_dim >= 1, "embed_dim must be at least 1")?;
        check(self.lstm_units >= 1, "lstm_units must be at least 1")?;
        check(
            self.dropout_rate.is_finite() && (0.0..1.0).contains(&self.dropout_rate),
            "dropout_rate must lie in [0, 1)",
        )?;
        check(self.seq_len >= 1, "seq_len must be at least 1")?;
        check(self.max_vocab >= 1, "max_vocab must be at least 1")?;
        check(
            self.coverage > 0.0 && self.coverage <= 1.0,
            "coverage must lie in (0, 1]",
        )?;
        check(self.n_random >= 2, "n_random must be at least 2")?;
        check(self.tune_epochs >= 1, "tune_epochs must be at least 1")?;
        check(self.corpus_size >= 10, "corpus_size must be at least 10")?;
        check(self.lexicon_size >= 1, "lexicon_size must be at least 1")?;
        check(
            self.noise.is_finite() && self.noise >= 0.0,
            "noise must be a finite non-negative number",
        )?;
        Ok(())
    }

    /// The dataset path: the `dataset` key, or `<out>/synthetic.jsonl`.
    pub fn dataset_path(&self) -> PathBuf {
        self.dataset
            .clone()
            .unwrap_or_else(|| self.out_dir.join("synthetic.jsonl"))
    }

    /// The dataset path, checked for existence so missing inputs fail with
    /// the path in the message instead of a bare I/O error downstream.
    pub fn dataset_path_checked(&self) -> Result<PathBuf> {
        let path = self.dataset_path();
        if !path.is_file() {
            return Err(Error::Config(format!(
                "dataset {} does not exist (set dataset= in the config, or run `sentiscore synth` first)",
                path.display()
            )));
        }
        Ok(path)
    }

    /// Resolves the dataset format from the `format` key and the path.
    pub fn dataset_format(&self, path: &Path) -> Result<Format> {
        Format::from_config(&self.format, path)
    }

    /// Builds the tokenizer from the configured dictionary and stop list.
    /// An explicit path must exist; unset paths fall back as documented.
    pub fn preprocessor(&self) -> Result<Preprocessor> {
        let dictionary = match &self.dictionary {
            Some(path) => {
                if !path.is_file() {
                    return Err(Error::Config(format!(
                        "dictionary {} does not exist",
                        path.display()
                    )));
                }
                Dictionary::load(path)?
            }
            None => {
                let fallback = self.out_dir.join("dictionary.txt");
                if fallback.is_file() {
                    Dictionary::load(&fallback)?
                } else {
                    Dictionary::empty()
                }
            }
        };
        let stoplist = match &self.stoplist {
            Some(path) => {
                if !path.is_file() {
                    return Err(Error::Config(format!(
                        "stoplist {} does not exist",
                        path.display()
                    )));
                }
                Stoplist::load(path)?
            }
            None => Stoplist::empty(),
        };
        Ok(Preprocessor {
            dictionary,
            stoplist,
        })
    }

    /// Assembles the model shape for a vocabulary of `vocab_size` ids.
    pub fn model_config(&self, vocab_size: usize) -> ModelConfig {
        ModelConfig {
            vocab_size,
            embed_dim: self.embed_dim,
            lstm_units: self.lstm_units,
            dropout_rate: self.dropout_rate,
            seq_len: self.seq_len,
        }
    }

    /// Assembles the training schedule for a vocabulary of `vocab_size` ids.
    pub fn train_config(&self, vocab_size: usize) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            split_fraction: self.split_fraction,
            seed: self.seed,
            learning_rate: self.learning_rate,
            model: self.model_config(vocab_size),
        }
    }

    /// Assembles the synthetic-corpus generator parameters.
    pub fn synth_params(&self) -> SynthParams {
        SynthParams {
            corpus_size: self.corpus_size,
            lexicon_size: self.lexicon_size,
            noise: self.noise,
        }
    }

    /// Serializes the config as a loadable key-value file. Unset optional
    /// paths are omitted. `from_text(to_text(c))` reproduces `c` whenever
    /// the paths contain valid UTF-8.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut kv = |key: &str, value: String| {
            out.push_str(key);
            out.push_str(" = ");
            out.push_str(&value);
            out.push('\n');
        };
        if let Some(path) = &self.dataset {
            kv("dataset", path.display().to_string());
        }
        kv("format", self.format.clone());
        if let Some(path) = &self.dictionary {
            kv("dictionary", path.display().to_string());
        }
        if let Some(path) = &self.stoplist {
            kv("stoplist", path.display().to_string());
        }
        kv("out", self.out_dir.display().to_string());
        kv("seed", self.seed.to_string());
        kv("epochs", self.epochs.to_string());
        kv("batch_size", self.batch_size.to_string());
        kv("split_fraction", self.split_fraction.to_string());
        kv("learning_rate", self.learning_rate.to_string());
        kv("embed_dim", self.embed_dim.to_string());
        kv("lstm_units", self.lstm_units.to_string());
        kv("dropout_rate", self.dropout_rate.to_string());
        kv("seq_len", self.seq_len.to_string());
        kv("max_vocab", self.max_vocab.to_string());
        kv("coverage", self.coverage.to_string());
        kv("n_random", self.n_random.to_string());
        kv("n_bayes", self.n_bayes.to_string());
        kv("tune_epochs", self.tune_epochs.to_string());
        kv("corpus_size", self.corpus_size.to_string());
        kv("lexicon_size", self.lexicon_size.to_string());
        kv("noise", self.noise.to_string());
        out
    }
}
