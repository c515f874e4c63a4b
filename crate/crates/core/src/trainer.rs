//! Dataset splitting, the training loop, checkpoints, history export, and
//! end-user prediction.
//!
//! A run is fully determined by its [`TrainConfig`]: the seed inside it is
//! expanded into independent streams for weight init, dropout masks, and
//! epoch shuffles (see [`crate::rng::tags`]), so the same config and data
//! reproduce the final checkpoint and history bit for bit.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::corpus::{clean_text, CleanReview};
use crate::nnet::{
    adam_step, backward, forward_eval, forward_train, init_params, mse_loss, AdamState,
    ModelConfig, ModelParams,
};
use crate::rng::{derive_seed, tags, Rng};
use crate::textprep::{encode, normalize_label, pad_truncate, Preprocessor, Vocabulary};
use crate::{Error, Result};

/// One encoded training sample: ids padded to the model's sequence length
/// and a label on the normalized [0, 1] scale.
#[derive(Clone, Debug, PartialEq)]
pub struct Example {
    pub ids: Vec<usize>,
    pub label: f32,
}

/// Everything a training run needs besides the data.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub split_fraction: f64,
    pub seed: u64,
    pub learning_rate: f64,
    pub model: ModelConfig,
}

impl TrainConfig {
    /// Defaults for everything except the vocabulary size, which always
    /// comes from the actual vocabulary.
    pub fn with_defaults(vocab_size: usize, seed: u64) -> Self {
        TrainConfig {
            epochs: 100,
            batch_size: 64,
            split_fraction: 0.8,
            seed,
            learning_rate: 0.005358,
            model: ModelConfig::with_defaults(vocab_size),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if !(self.split_fraction > 0.0 && self.split_fraction < 1.0) {
            return Err(Error::Config(format!(
                "split_fraction must lie strictly between 0 and 1, got {}",
                self.split_fraction
            )));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::Config(format!(
                "learning_rate must be positive and finite, got {}",
                self.learning_rate
            )));
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical text rendering; stored in checkpoints so
    /// a model file records exactly how it was trained.
    pub fn digest(&self) -> String {
        let m = self.model;
        let text = format!(
            "epochs={}\nbatch_size={}\nsplit_fraction={}\nseed={}\nlearning_rate={}\n\
             vocab_size={}\nembed_dim={}\nlstm_units={}\ndropout_rate={}\nseq_len={}\n",
            self.epochs,
            self.batch_size,
            self.split_fraction,
            self.seed,
            self.learning_rate,
            m.vocab_size,
            m.embed_dim,
            m.lstm_units,
            m.dropout_rate,
            m.seq_len
        );
        let hash = Sha256::digest(text.as_bytes());
        hash.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Full-set metrics recorded after each epoch, on the normalized scale.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_mae: f64,
    pub val_loss: f64,
    pub val_mae: f64,
}

/// Splits by a seeded shuffle: the first ⌊fraction·n⌋ shuffled items train,
/// the rest validate. Deterministic per seed; the two sides partition the
/// input.
pub fn split_dataset<T: Clone>(data: &[T], fraction: f64, seed: u64) -> Result<(Vec<T>, Vec<T>)> {
    if data.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "cannot split {} item(s) into train and validation",
            data.len()
        )));
    }
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "split fraction must lie strictly between 0 and 1, got {fraction}"
        )));
    }
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut rng = Rng::from_seed(seed);
    rng.shuffle(&mut order);
    let cut = (fraction * data.len() as f64).floor() as usize;
    if cut == 0 || cut == data.len() {
        return Err(Error::InvalidArgument(format!(
            "split fraction {fraction} leaves an empty side for {} items",
            data.len()
        )));
    }
    let train = order[..cut].iter().map(|&i| data[i].clone()).collect();
    let val = order[cut..].iter().map(|&i| data[i].clone()).collect();
    Ok((train, val))
}

/// Mean loss and MAE over a set, eval-mode forward (no dropout), raw
/// unclamped outputs, fixed-order f64 accumulation.
pub fn evaluate_model(
    examples: &[Example],
    params: &ModelParams<f32>,
    batch_size: usize,
) -> Result<(f64, f64)> {
    if examples.is_empty() {
        return Err(Error::InvalidArgument("evaluate over an empty set".into()));
    }
    let mut sum_sq = 0.0f64;
    let mut sum_abs = 0.0f64;
    for chunk in examples.chunks(batch_size.max(1)) {
        let batch: Vec<&[usize]> = chunk.iter().map(|ex| ex.ids.as_slice()).collect();
        let preds = forward_eval(&batch, params)?;
        for (pred, ex) in preds.iter().zip(chunk) {
            let e = *pred as f64 - ex.label as f64;
            sum_sq += e * e;
            sum_abs += e.abs();
        }
    }
    let n = examples.len() as f64;
    Ok((sum_sq / n, sum_abs / n))
}

/// Trains for exactly `config.epochs` epochs and returns the final
/// parameters with the full history. See [`train_with_observer`].
pub fn train(
    train_set: &[Example],
    val_set: &[Example],
    config: &TrainConfig,
) -> Result<(ModelParams<f32>, Vec<EpochRecord>)> {
    train_with_observer(train_set, val_set, config, |_| Ok(()))
}

/// Training loop with a per-epoch callback. The observer runs after each
/// completed epoch's record is appended, so a caller streaming history to
/// disk keeps every finished epoch even if a later one aborts.
///
/// Each epoch reshuffles the train set (one seeded stream advanced across
/// epochs), walks all minibatches including a final partial one, then
/// evaluates both sets in full. There is no early stopping; a non-finite
/// loss aborts with the epoch and batch where it appeared.
pub fn train_with_observer<F>(
    train_set: &[Example],
    val_set: &[Example],
    config: &TrainConfig,
    mut observer: F,
) -> Result<(ModelParams<f32>, Vec<EpochRecord>)>
where
    F: FnMut(&EpochRecord) -> Result<()>,
{
    config.validate()?;
    if train_set.is_empty() || val_set.is_empty() {
        return Err(Error::InvalidArgument(
            "training requires nonempty train and validation sets".into(),
        ));
    }
    let mut params: ModelParams<f32> =
        init_params(config.model, derive_seed(config.seed, tags::INIT))?;
    let mut adam = AdamState::new(config.model, config.learning_rate);
    let mut shuffle_rng = Rng::from_seed(derive_seed(config.seed, tags::SHUFFLE));
    let mut dropout_rng = Rng::from_seed(derive_seed(config.seed, tags::DROPOUT));
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut history = Vec::with_capacity(config.epochs);

    for epoch in 1..=config.epochs {
        shuffle_rng.shuffle(&mut order);
        for (batch_idx, chunk) in order.chunks(config.batch_size).enumerate() {
            let batch: Vec<&[usize]> = chunk.iter().map(|&i| train_set[i].ids.as_slice()).collect();
            let targets: Vec<f32> = chunk.iter().map(|&i| train_set[i].label).collect();
            let coord = |what: &str| {
                Error::NonFinite(format!("{what} at epoch {epoch}, batch {}", batch_idx + 1))
            };
            let cache = forward_train(&batch, &params, &mut dropout_rng)?;
            let loss = mse_loss(cache.predictions(), &targets)?;
            if !loss.is_finite() {
                return Err(coord("training loss"));
            }
            let grads = backward(&cache, &targets, &params)?;
            adam_step(&mut params, &grads, &mut adam).map_err(|e| match e {
                Error::NonFinite(msg) => coord(&msg),
                other => other,
            })?;
        }
        let (train_loss, train_mae) = evaluate_model(train_set, &params, config.batch_size)?;
        let (val_loss, val_mae) = evaluate_model(val_set, &params, config.batch_size)?;
        for (name, value) in [
            ("train loss", train_loss),
            ("train MAE", train_mae),
            ("validation loss", val_loss),
            ("validation MAE", val_mae),
        ] {
            if !value.is_finite() {
                return Err(Error::NonFinite(format!("{name} at epoch {epoch}")));
            }
        }
        let record = EpochRecord {
            epoch,
            train_loss,
            train_mae,
            val_loss,
            val_mae,
        };
        history.push(record);
        observer(&record)?;
    }
    Ok((params, history))
}

/// Writes history as CSV with the header
/// `epoch,train_loss,train_mae,val_loss,val_mae`. f64 values use the
/// shortest round-tripping decimal form, so output is deterministic.
pub fn write_history<P: AsRef<Path>>(path: P, history: &[EpochRecord]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "epoch,train_loss,train_mae,val_loss,val_mae")?;
    for r in history {
        writeln!(
            w,
            "{},{},{},{},{}",
            r.epoch, r.train_loss, r.train_mae, r.val_loss, r.val_mae
        )?;
    }
    w.flush()?;
    Ok(())
}

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"SSCK";
pub const CHECKPOINT_VERSION: u16 = 1;

/// Header length guard: a corrupt length prefix must not trigger a huge
/// allocation before the parse fails.
const MAX_HEADER_BYTES: u32 = 1 << 20;

/// A trained model plus enough metadata to refuse mismatched use: the
/// vocabulary digest pins the token mapping, the train-config digest records
/// provenance.
#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub version: u16,
    pub model: ModelConfig,
    pub seed: u64,
    pub train_digest: String,
    pub vocab_digest: String,
    pub params: ModelParams<f32>,
}

impl Checkpoint {
    pub fn new(
        seed: u64,
        train_digest: String,
        vocab_digest: String,
        params: ModelParams<f32>,
    ) -> Self {
        Checkpoint {
            version: CHECKPOINT_VERSION,
            model: params.config,
            seed,
            train_digest,
            vocab_digest,
            params,
        }
    }

    /// Rejects a checkpoint whose structural dimensions disagree with what
    /// the caller built (dropout is a training-only knob and may differ).
    pub fn require_model(&self, expected: ModelConfig) -> Result<()> {
        let m = self.model;
        for (name, got, want) in [
            ("vocab_size", m.vocab_size, expected.vocab_size),
            ("embed_dim", m.embed_dim, expected.embed_dim),
            ("lstm_units", m.lstm_units, expected.lstm_units),
            ("seq_len", m.seq_len, expected.seq_len),
        ] {
            if got != want {
                return Err(Error::Dimension(format!(
                    "checkpoint has {name}={got}, expected {want}"
                )));
            }
        }
        Ok(())
    }

    /// Rejects a checkpoint trained against a different vocabulary.
    pub fn require_vocab(&self, vocab: &Vocabulary) -> Result<()> {
        let digest = vocab.digest();
        if self.vocab_digest != digest {
            return Err(Error::Checkpoint(format!(
                "checkpoint was trained with vocabulary {} but the supplied vocabulary is {}",
                &self.vocab_digest[..12.min(self.vocab_digest.len())],
                &digest[..12]
            )));
        }
        Ok(())
    }
}

fn header_text(ckpt: &Checkpoint) -> String {
    let m = ckpt.model;
    format!(
        "vocab_size={}\nembed_dim={}\nlstm_units={}\ndropout_rate={}\nseq_len={}\n\
         seed={}\ntrain_digest={}\nvocab_digest={}\n",
        m.vocab_size,
        m.embed_dim,
        m.lstm_units,
        m.dropout_rate,
        m.seq_len,
        ckpt.seed,
        ckpt.train_digest,
        ckpt.vocab_digest
    )
}

/// Binary layout: magic `SSCK`, version u16 LE, header length u32 LE, UTF-8
/// key=value header, then each parameter array as raw little-endian f32 in
/// the fixed order embedding, W_fwd, U_fwd, b_fwd, W_bwd, U_bwd, b_bwd,
/// w_out, b_out.
pub fn save_checkpoint<P: AsRef<Path>>(path: P, ckpt: &Checkpoint) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&CHECKPOINT_MAGIC)?;
    w.write_all(&ckpt.version.to_le_bytes())?;
    let header = header_text(ckpt);
    w.write_all(&(header.len() as u32).to_le_bytes())?;
    w.write_all(header.as_bytes())?;
    for (_, array) in ckpt.params.arrays() {
        for v in array {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

fn read_exact_or(r: &mut impl Read, buf: &mut [u8], what: &str) -> Result<()> {
    r.read_exact(buf).map_err(|e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            Error::Checkpoint(format!("truncated file while reading {what}"))
        } else {
            Error::Io(e)
        }
    })
}

fn parse_header(header: &str) -> Result<Checkpoint> {
    let mut fields = std::collections::HashMap::new();
    for line in header.lines() {
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::Checkpoint(format!("malformed header line {line:?} (expected key=value)"))
        })?;
        if fields.insert(key.to_string(), value.to_string()).is_some() {
            return Err(Error::Checkpoint(format!("duplicate header field {key:?}")));
        }
    }
    let take = |key: &str| -> Result<String> {
        fields
            .get(key)
            .cloned()
            .ok_or_else(|| Error::Checkpoint(format!("missing header field {key:?}")))
    };
    let parse_usize = |key: &str| -> Result<usize> {
        take(key)?
            .parse()
            .map_err(|_| Error::Checkpoint(format!("header field {key:?} is not an integer")))
    };
    let model = ModelConfig {
        vocab_size: parse_usize("vocab_size")?,
        embed_dim: parse_usize("embed_dim")?,
        lstm_units: parse_usize("lstm_units")?,
        dropout_rate: take("dropout_rate")?
            .parse()
            .map_err(|_| Error::Checkpoint("header field \"dropout_rate\" is not a number".into()))?,
        seq_len: parse_usize("seq_len")?,
    };
    let seed: u64 = take("seed")?
        .parse()
        .map_err(|_| Error::Checkpoint("header field \"seed\" is not an integer".into()))?;
    Ok(Checkpoint {
        version: CHECKPOINT_VERSION,
        model,
        seed,
        train_digest: take("train_digest")?,
        vocab_digest: take("vocab_digest")?,
        params: ModelParams::zeros(model),
    })
}

pub fn load_checkpoint<P: AsRef<Path>>(path: P) -> Result<Checkpoint> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    read_exact_or(&mut r, &mut magic, "magic bytes")?;
    if magic != CHECKPOINT_MAGIC {
        return Err(Error::Checkpoint(
            "not a checkpoint file (bad magic bytes)".into(),
        ));
    }
    let mut version = [0u8; 2];
    read_exact_or(&mut r, &mut version, "format version")?;
    let version = u16::from_le_bytes(version);
    if version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported checkpoint version {version} (this build reads {CHECKPOINT_VERSION})"
        )));
    }
    let mut len = [0u8; 4];
    read_exact_or(&mut r, &mut len, "header length")?;
    let len = u32::from_le_bytes(len);
    if len > MAX_HEADER_BYTES {
        return Err(Error::Checkpoint(format!(
            "header length {len} exceeds the {MAX_HEADER_BYTES}-byte limit"
        )));
    }
    let mut header = vec![0u8; len as usize];
    read_exact_or(&mut r, &mut header, "header")?;
    let header = String::from_utf8(header)
        .map_err(|_| Error::Checkpoint("header is not valid UTF-8".into()))?;
    let mut ckpt = parse_header(&header)?;
    ckpt.model.validate()?;
    for (name, array) in ckpt.params.arrays_mut() {
        let mut bytes = vec![0u8; array.len() * 4];
        read_exact_or(&mut r, &mut bytes, name)?;
        for (slot, chunk) in array.iter_mut().zip(bytes.chunks_exact(4)) {
            *slot = f32::from_le_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]);
        }
    }
    let mut excess = [0u8; 1];
    match r.read(&mut excess) {
        Ok(0) => {}
        Ok(_) => {
            return Err(Error::Checkpoint(
                "trailing bytes after the parameter arrays".into(),
            ))
        }
        Err(e) => return Err(Error::Io(e)),
    }
    if !ckpt.params.all_finite() {
        return Err(Error::NonFinite("checkpoint parameter arrays".into()));
    }
    Ok(ckpt)
}

/// Encoding summary: how many reviews survived tokenization.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct EncodeStats {
    pub encoded: usize,
    pub dropped_empty: usize,
}

/// Turns cleaned reviews into padded id sequences with normalized labels.
/// Reviews whose token stream is empty (everything was a stop word) cannot
/// form a sequence and are dropped, counted in the stats.
pub fn encode_dataset(
    reviews: &[CleanReview],
    pre: &Preprocessor,
    vocab: &Vocabulary,
    seq_len: usize,
) -> Result<(Vec<Example>, EncodeStats)> {
    let mut examples = Vec::with_capacity(reviews.len());
    let mut stats = EncodeStats::default();
    for review in reviews {
        let tokens = pre.tokens(&review.text);
        if tokens.is_empty() {
            stats.dropped_empty += 1;
            continue;
        }
        let ids = encode(&tokens, vocab);
        let seq = pad_truncate(&ids, seq_len)?;
        let label = normalize_label(review.rating)? as f32;
        examples.push(Example {
            ids: seq.ids,
            label,
        });
        stats.encoded += 1;
    }
    Ok((examples, stats))
}

/// Maps a raw (unbounded) model output to the reported score: clamp to
/// [0, 1], then scale to [0, 5].
pub fn score_from_raw(raw: f64) -> f64 {
    raw.clamp(0.0, 1.0) * 5.0
}

/// Scores free-form texts with the full pipeline: clean, segment, encode,
/// pad, eval-mode forward, clamp and scale. A text that cleans or tokenizes
/// to nothing yields a per-item error; the rest of the batch continues.
pub fn predict(
    texts: &[String],
    params: &ModelParams<f32>,
    vocab: &Vocabulary,
    pre: &Preprocessor,
) -> Result<Vec<Result<f64>>> {
    if vocab.size() != params.config.vocab_size {
        return Err(Error::Dimension(format!(
            "vocabulary has {} ids but the model expects {}",
            vocab.size(),
            params.config.vocab_size
        )));
    }
    let mut scores = Vec::with_capacity(texts.len());
    for (i, text) in texts.iter().enumerate() {
        let tokens = pre.tokens(&clean_text(text));
        if tokens.is_empty() {
            scores.push(Err(Error::InvalidArgument(format!(
                "text {} is empty after cleaning",
                i + 1
            ))));
            continue;
        }
        let ids = encode(&tokens, vocab);
        let seq = pad_truncate(&ids, params.config.seq_len)?;
        let preds = forward_eval(&[seq.ids.as_slice()], params)?;
        scores.push(Ok(score_from_raw(preds[0] as f64)));
    }
    Ok(scores)
}
