//! Sentiment regression for Chinese review text.
//!
//! This crate implements the full pipeline from raw labeled reviews to a
//! trained bidirectional LSTM regressor and its evaluation:
//!
//! * [`corpus`]: dataset ingestion (CSV / JSON-lines) and text cleaning.
//! * [`textprep`]: dictionary segmentation, stop-word removal, vocabulary
//!   construction with coverage analysis, integer encoding, padding, and
//!   label normalization.
//! * [`nnet`]: the BiLSTM regression network with hand-written forward and
//!   backward passes, Adam, and finite-difference gradient checking.
//! * [`trainer`]: mini-batch training loops, dataset splits, checkpoints.
//! * [`hypertune`]: Gaussian-process Bayesian optimization of learning rate,
//!   LSTM width, and dropout.
//! * [`metrics`]: the regression metric suite (MSE, RMSE, MAE, MAPE, MSLE,
//!   MedAE, R2, explained variance).
//! * [`baseline`]: a naive Bayes polarity baseline rescaled to ratings.
//! * [`synth`]: a synthetic review-corpus generator with a known lexicon.
//! * [`cli`]: the `sentiscore` command-line front end.
//!
//! All randomness flows through [`rng::Rng`], a seeded deterministic
//! generator, so every artifact the pipeline writes is reproducible
//! byte-for-byte from the master seed.

pub mod baseline;
pub mod cli;
pub mod config;
pub mod corpus;
pub mod hypertune;
pub mod metrics;
pub mod nnet;
pub mod rng;
pub mod synth;
pub mod textprep;
pub mod trainer;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    /// A record or line in an input file failed to parse.
    #[error("parse error in {path} at line {line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    /// Invalid or inconsistent configuration.
    #[error("config error: {0}")]
    Config(String),

    /// Array shapes or model dimensions do not agree.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// A numeric array picked up a NaN or infinity.
    #[error("non-finite value in {0}")]
    NonFinite(String),

    /// A checkpoint file is malformed or incompatible.
    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    /// An operation was called outside its supported domain.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
