//! A smoothed naive-Bayes polarity scorer used as the comparison point for
//! the BiLSTM. Ratings ≥ 4 train the positive class, ≤ 2 the negative
//! class, middles are dropped; scores are 5 · P(positive | tokens).

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::corpus::{clean_text, CleanReview};
use crate::textprep::Preprocessor;
use crate::{Error, Result};

/// Rating at or above which a review trains the positive class.
pub const POSITIVE_THRESHOLD: f64 = 4.0;
/// Rating at or below which a review trains the negative class.
pub const NEGATIVE_THRESHOLD: f64 = 2.0;

const MODEL_MAGIC: &str = "sentiscore-baseline v1";

/// Multinomial naive Bayes over tokens with add-one smoothing. The
/// smoothing vocabulary is the union of tokens seen in either class plus one
/// virtual "unseen" type, so tokens outside the table still get a finite,
/// properly normalized likelihood.
#[derive(Clone, Debug)]
pub struct NBModel {
    pub log_prior_pos: f64,
    pub log_prior_neg: f64,
    pub unseen_log_pos: f64,
    pub unseen_log_neg: f64,
    tokens: Vec<(String, f64, f64)>,
    index: HashMap<String, usize>,
}

impl NBModel {
    /// Per-class token log-likelihoods, falling back to the smoothed unseen
    /// values for tokens outside the training vocabulary.
    pub fn log_likelihoods(&self, token: &str) -> (f64, f64) {
        match self.index.get(token) {
            Some(&i) => (self.tokens[i].1, self.tokens[i].2),
            None => (self.unseen_log_pos, self.unseen_log_neg),
        }
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    /// Observed tokens in sorted order with their per-class log-likelihoods.
    pub fn iter_tokens(&self) -> impl Iterator<Item = (&str, f64, f64)> {
        self.tokens.iter().map(|(t, p, n)| (t.as_str(), *p, *n))
    }

    pub fn vocab_len(&self) -> usize {
        self.tokens.len()
    }

    pub fn validate(&self) -> Result<()> {
        let prior_sum = self.log_prior_pos.exp() + self.log_prior_neg.exp();
        if (prior_sum - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "class priors sum to {prior_sum}, expected 1"
            )));
        }
        let all = self
            .tokens
            .iter()
            .flat_map(|(_, p, n)| [*p, *n])
            .chain([
                self.log_prior_pos,
                self.log_prior_neg,
                self.unseen_log_pos,
                self.unseen_log_neg,
            ]);
        for v in all {
            if !v.is_finite() {
                return Err(Error::NonFinite("baseline model parameters".into()));
            }
        }
        Ok(())
    }

    fn from_tokens(
        log_prior_pos: f64,
        log_prior_neg: f64,
        unseen_log_pos: f64,
        unseen_log_neg: f64,
        tokens: Vec<(String, f64, f64)>,
    ) -> Self {
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, (t, _, _))| (t.clone(), i))
            .collect();
        NBModel {
            log_prior_pos,
            log_prior_neg,
            unseen_log_pos,
            unseen_log_neg,
            tokens,
            index,
        }
    }
}

/// Counts tokens per polarity class and fits the smoothed model. Reviews
/// with middle ratings (between the thresholds) carry no polarity signal
/// and are ignored.
pub fn train_baseline(reviews: &[CleanReview], pre: &Preprocessor) -> Result<NBModel> {
    let mut counts: BTreeMap<String, (u64, u64)> = BTreeMap::new();
    let mut n_pos_reviews = 0u64;
    let mut n_neg_reviews = 0u64;
    let mut n_pos_tokens = 0u64;
    let mut n_neg_tokens = 0u64;
    for review in reviews {
        let positive = if review.rating >= POSITIVE_THRESHOLD {
            true
        } else if review.rating <= NEGATIVE_THRESHOLD {
            false
        } else {
            continue;
        };
        let tokens = pre.tokens(&review.text);
        if positive {
            n_pos_reviews += 1;
            n_pos_tokens += tokens.len() as u64;
        } else {
            n_neg_reviews += 1;
            n_neg_tokens += tokens.len() as u64;
        }
        for token in tokens {
            let slot = counts.entry(token).or_insert((0, 0));
            if positive {
                slot.0 += 1;
            } else {
                slot.1 += 1;
            }
        }
    }
    if n_pos_reviews == 0 {
        return Err(Error::InvalidArgument(format!(
            "no positive reviews (rating >= {POSITIVE_THRESHOLD}) to train the baseline"
        )));
    }
    if n_neg_reviews == 0 {
        return Err(Error::InvalidArgument(format!(
            "no negative reviews (rating <= {NEGATIVE_THRESHOLD}) to train the baseline"
        )));
    }
    let total = (n_pos_reviews + n_neg_reviews) as f64;
    // Union vocabulary plus one virtual type for unseen tokens.
    let smoothing_types = counts.len() as f64 + 1.0;
    let denom_pos = n_pos_tokens as f64 + smoothing_types;
    let denom_neg = n_neg_tokens as f64 + smoothing_types;
    let tokens: Vec<(String, f64, f64)> = counts
        .into_iter()
        .map(|(token, (cp, cn))| {
            let lp = ((cp as f64 + 1.0) / denom_pos).ln();
            let ln_ = ((cn as f64 + 1.0) / denom_neg).ln();
            (token, lp, ln_)
        })
        .collect();
    Ok(NBModel::from_tokens(
        (n_pos_reviews as f64 / total).ln(),
        (n_neg_reviews as f64 / total).ln(),
        (1.0 / denom_pos).ln(),
        (1.0 / denom_neg).ln(),
        tokens,
    ))
}

/// Numerically stable sigmoid: never exponentiates a positive argument.
fn sigmoid_stable(d: f64) -> f64 {
    if d >= 0.0 {
        1.0 / (1.0 + (-d).exp())
    } else {
        let e = d.exp();
        e / (1.0 + e)
    }
}

/// Scores one text: clean, tokenize with the shared pipeline, then
/// 5 · P(positive | tokens). The posterior is computed from the difference
/// of class log-scores, so arbitrarily long inputs saturate instead of
/// overflowing. A text with no tokens falls back to the positive prior.
pub fn score_baseline(text: &str, model: &NBModel, pre: &Preprocessor) -> f64 {
    let tokens = pre.tokens(&clean_text(text));
    if tokens.is_empty() {
        return 5.0 * model.log_prior_pos.exp();
    }
    let mut log_pos = model.log_prior_pos;
    let mut log_neg = model.log_prior_neg;
    for token in &tokens {
        let (lp, ln_) = model.log_likelihoods(token);
        log_pos += lp;
        log_neg += ln_;
    }
    5.0 * sigmoid_stable(log_pos - log_neg)
}

/// Model file: a magic line, key=value scalars, a token count, then one
/// tab-separated `token<TAB>loglik_pos<TAB>loglik_neg` row per token.
pub fn save_baseline<P: AsRef<Path>>(path: P, model: &NBModel) -> Result<()> {
    model.validate()?;
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{MODEL_MAGIC}")?;
    writeln!(w, "log_prior_pos={}", model.log_prior_pos)?;
    writeln!(w, "log_prior_neg={}", model.log_prior_neg)?;
    writeln!(w, "unseen_log_pos={}", model.unseen_log_pos)?;
    writeln!(w, "unseen_log_neg={}", model.unseen_log_neg)?;
    writeln!(w, "tokens={}", model.vocab_len())?;
    for (token, lp, ln_) in model.iter_tokens() {
        if token.contains(['\t', '\n', '\r']) {
            return Err(Error::InvalidArgument(format!(
                "token {token:?} contains tab or newline and cannot be serialized"
            )));
        }
        writeln!(w, "{token}\t{lp}\t{ln_}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_baseline<P: AsRef<Path>>(path: P) -> Result<NBModel> {
    let path = path.as_ref();
    let display = path.display().to_string();
    let reader = BufReader::new(File::open(path)?);
    let mut lines = reader.lines().enumerate();
    let mut next_line = |what: &str| -> Result<(usize, String)> {
        match lines.next() {
            Some((i, line)) => Ok((i + 1, line?)),
            None => Err(Error::Parse {
                path: display.clone(),
                line: 0,
                msg: format!("file ended before {what}"),
            }),
        }
    };
    let (line_no, magic) = next_line("the format line")?;
    if magic != MODEL_MAGIC {
        return Err(Error::Parse {
            path: display.clone(),
            line: line_no,
            msg: format!("expected {MODEL_MAGIC:?}, found {magic:?}"),
        });
    }
    let mut scalar = |key: &str| -> Result<f64> {
        let (line_no, line) = next_line(key)?;
        let value = line
            .strip_prefix(key)
            .and_then(|rest| rest.strip_prefix('='))
            .ok_or_else(|| Error::Parse {
                path: display.clone(),
                line: line_no,
                msg: format!("expected {key}=<value>, found {line:?}"),
            })?;
        value.parse().map_err(|_| Error::Parse {
            path: display.clone(),
            line: line_no,
            msg: format!("{key} is not a number: {value:?}"),
        })
    };
    let log_prior_pos = scalar("log_prior_pos")?;
    let log_prior_neg = scalar("log_prior_neg")?;
    let unseen_log_pos = scalar("unseen_log_pos")?;
    let unseen_log_neg = scalar("unseen_log_neg")?;
    let count = scalar("tokens")? as usize;
    let mut tokens = Vec::with_capacity(count);
    for _ in 0..count {
        let (line_no, line) = next_line("a token row")?;
        let mut parts = line.split('\t');
        let parse_err = |msg: String| Error::Parse {
            path: display.clone(),
            line: line_no,
            msg,
        };
        let token = parts
            .next()
            .filter(|t| !t.is_empty())
            .ok_or_else(|| parse_err("empty token".into()))?;
        let mut ll = |name: &str| -> Result<f64> {
            parts
                .next()
                .ok_or_else(|| parse_err(format!("missing {name}")))?
                .parse()
                .map_err(|_| parse_err(format!("{name} is not a number")))
        };
        let lp = ll("loglik_pos")?;
        let ln_ = ll("loglik_neg")?;
        if parts.next().is_some() {
            return Err(parse_err("expected 3 tab-separated fields".into()));
        }
        tokens.push((token.to_string(), lp, ln_));
    }
    if let Some((i, line)) = lines.next() {
        let line = line?;
        if !line.trim().is_empty() {
            return Err(Error::Parse {
                path: display,
                line: i + 1,
                msg: "trailing content after the token table".into(),
            });
        }
    }
    let model = NBModel::from_tokens(
        log_prior_pos,
        log_prior_neg,
        unseen_log_pos,
        unseen_log_neg,
        tokens,
    );
    model.validate()?;
    Ok(model)
}
