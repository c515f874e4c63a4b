//! The numerical core: Embedding → BiLSTM → Dropout → Dense regression.
//!
//! Everything here is written against the [`Real`] scalar trait so the same
//! code trains in f32 and gradient-checks in f64. All loops are plain,
//! fixed-order scalar code: determinism is a contract, so there is no
//! opportunistic reassociation or threading inside a training step.

mod adam;
mod backward;
mod forward;
mod gradcheck;
mod params;

pub use adam::{adam_step, update_slice, AdamState};
pub use backward::backward;
pub use forward::{
    bilstm_feature, forward_eval, forward_train, forward_train_frozen, lstm_cell_forward,
    ForwardCache,
};
pub use gradcheck::{gradient_check, GradCheckCoordinate, GradCheckReport};
pub use params::{init_params, ModelParams, ARRAY_NAMES};

use crate::{Error, Result};

/// Scalar type for network arithmetic: f32 for training, f64 for checking.
pub trait Real:
    num_traits::Float + std::fmt::Debug + std::fmt::Display + Send + Sync + 'static
{
    fn from_f64(x: f64) -> Self;
    fn as_f64(self) -> f64;
}

impl Real for f32 {
    fn from_f64(x: f64) -> Self {
        x as f32
    }
    fn as_f64(self) -> f64 {
        self as f64
    }
}

impl Real for f64 {
    fn from_f64(x: f64) -> Self {
        x
    }
    fn as_f64(self) -> f64 {
        self
    }
}

/// Architecture dimensions shared by parameters, caches, and checkpoints.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelConfig {
    /// Vocabulary size V, including PAD and OOV.
    pub vocab_size: usize,
    /// Embedding width D.
    pub embed_dim: usize,
    /// LSTM units H per direction; the feature vector is 2H wide.
    pub lstm_units: usize,
    /// Dropout probability p applied to the feature vector in training.
    pub dropout_rate: f64,
    /// Fixed sequence length L.
    pub seq_len: usize,
}

impl ModelConfig {
    /// Architecture defaults around a given vocabulary size: 128-wide
    /// embeddings, 52 units per direction, dropout 0.2, 100-step sequences.
    pub fn with_defaults(vocab_size: usize) -> Self {
        ModelConfig {
            vocab_size,
            embed_dim: 128,
            lstm_units: 52,
            dropout_rate: 0.2,
            seq_len: 100,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.vocab_size < 2 {
            return Err(Error::Config(format!(
                "vocab_size {} < 2 (PAD and OOV are always present)",
                self.vocab_size
            )));
        }
        if self.embed_dim == 0 || self.lstm_units == 0 || self.seq_len == 0 {
            return Err(Error::Config(
                "embed_dim, lstm_units, and seq_len must be ≥ 1".into(),
            ));
        }
        if !self.dropout_rate.is_finite() || !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::Config(format!(
                "dropout_rate {} outside [0, 1)",
                self.dropout_rate
            )));
        }
        Ok(())
    }
}

/// Mean squared error over a batch.
pub fn mse_loss<T: Real>(pred: &[T], target: &[T]) -> Result<T> {
    if pred.len() != target.len() {
        return Err(Error::Dimension(format!(
            "{} predictions vs {} targets",
            pred.len(),
            target.len()
        )));
    }
    if pred.is_empty() {
        return Err(Error::InvalidArgument("mse over an empty batch".into()));
    }
    let mut sum = T::zero();
    for i in 0..pred.len() {
        let e = pred[i] - target[i];
        sum = sum + e * e;
    }
    Ok(sum / T::from_f64(pred.len() as f64))
}

pub(crate) fn sigmoid<T: Real>(x: T) -> T {
    T::one() / (T::one() + (-x).exp())
}
