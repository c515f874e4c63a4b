//! Synthetic planted-lexicon corpus generator.
//!
//! A known lexicon of positive (+1) and negative (−1) tokens plus neutral
//! filler is planted; each review samples a token mix and its rating is a
//! deterministic function of the tokens it actually contains, so generated
//! data carries learnable ground truth for desk-scale evaluation.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::corpus::RawReview;
use crate::rng::Rng;
use crate::{Error, Result};

/// Rating units per unit of mean token weight. Mean weight spans [−1, 1],
/// so ratings span the full [0, 5] exactly at zero noise.
pub const SENTIMENT_SCALE: f64 = 2.5;

/// Fraction of token slots drawing from the sentiment lexicon rather than
/// neutral filler.
const SENTIMENT_DENSITY: f64 = 0.6;

const MIN_TOKENS: u64 = 6;
const MAX_TOKENS: u64 = 20;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SynthParams {
    pub corpus_size: usize,
    /// Lexicon entries per polarity; neutral filler gets twice this many.
    pub lexicon_size: usize,
    /// Standard deviation of the Gaussian rating noise.
    pub noise: f64,
}

impl SynthParams {
    pub fn validate(&self) -> Result<()> {
        if self.corpus_size < 10 {
            return Err(Error::InvalidArgument(format!(
                "corpus_size must be at least 10, got {}",
                self.corpus_size
            )));
        }
        if self.lexicon_size == 0 {
            return Err(Error::InvalidArgument(
                "lexicon_size must be at least 1".into(),
            ));
        }
        if !(self.noise.is_finite() && self.noise >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "noise must be finite and non-negative, got {}",
                self.noise
            )));
        }
        Ok(())
    }
}

/// One ground-truth lexicon entry: a token and its planted weight
/// (+1 positive, −1 negative, 0 neutral).
#[derive(Clone, Debug, PartialEq)]
pub struct LexiconEntry {
    pub token: String,
    pub weight: f64,
}

#[derive(Clone, Debug)]
pub struct SyntheticCorpus {
    pub reviews: Vec<RawReview>,
    pub lexicon: Vec<LexiconEntry>,
}

/// The label rule: clamp(2.5 + 2.5 · mean weight + noise, 0, 5).
pub fn rating_from_mean_weight(mean_weight: f64, noise: f64) -> f64 {
    (2.5 + SENTIMENT_SCALE * mean_weight + noise).clamp(0.0, 5.0)
}

/// Distinct two-character tokens from the CJK unified block, assigned in a
/// fixed order so the lexicon is a pure function of its size.
fn make_token(index: usize) -> String {
    let base = 0x4E00u32 + 2 * index as u32;
    let a = char::from_u32(base).expect("CJK block codepoint");
    let b = char::from_u32(base + 1).expect("CJK block codepoint");
    let mut s = String::with_capacity(8);
    s.push(a);
    s.push(b);
    s
}

/// Generates the corpus and its ground-truth lexicon. Reviews are written
/// as unsegmented text (tokens concatenated), matching how Chinese review
/// text arrives; the emitted lexicon doubles as the segmentation dictionary.
pub fn generate_synthetic_corpus(params: &SynthParams, seed: u64) -> Result<SyntheticCorpus> {
    params.validate()?;
    let k = params.lexicon_size;
    let mut lexicon = Vec::with_capacity(4 * k);
    for i in 0..k {
        lexicon.push(LexiconEntry {
            token: make_token(i),
            weight: 1.0,
        });
    }
    for i in k..2 * k {
        lexicon.push(LexiconEntry {
            token: make_token(i),
            weight: -1.0,
        });
    }
    for i in 2 * k..4 * k {
        lexicon.push(LexiconEntry {
            token: make_token(i),
            weight: 0.0,
        });
    }
    let positive = &lexicon[..k];
    let negative = &lexicon[k..2 * k];
    let neutral = &lexicon[2 * k..];

    let mut rng = Rng::from_seed(seed);
    let mut reviews = Vec::with_capacity(params.corpus_size);
    for i in 0..params.corpus_size {
        let len = MIN_TOKENS + rng.below(MAX_TOKENS - MIN_TOKENS + 1);
        // Per-review polarity bias spreads mean weights across the range.
        let theta = rng.uniform(-1.0, 1.0);
        let mut text = String::new();
        let mut weight_sum = 0.0;
        for _ in 0..len {
            let entry = if rng.next_f64() < SENTIMENT_DENSITY {
                if rng.next_f64() < (1.0 + theta) / 2.0 {
                    &positive[rng.below(k as u64) as usize]
                } else {
                    &negative[rng.below(k as u64) as usize]
                }
            } else {
                &neutral[rng.below(2 * k as u64) as usize]
            };
            text.push_str(&entry.token);
            weight_sum += entry.weight;
        }
        let noise = params.noise * rng.gaussian();
        let rating = rating_from_mean_weight(weight_sum / len as f64, noise);
        reviews.push(RawReview {
            user_id: format!("u{i:05}"),
            text,
            rating,
        });
    }
    Ok(SyntheticCorpus { reviews, lexicon })
}

/// Ground-truth lexicon file: `token<TAB>weight` per line.
pub fn write_lexicon<P: AsRef<Path>>(path: P, lexicon: &[LexiconEntry]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for entry in lexicon {
        writeln!(w, "{}\t{}", entry.token, entry.weight)?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_lexicon<P: AsRef<Path>>(path: P) -> Result<Vec<LexiconEntry>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let mut lexicon = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let err = |msg: String| Error::Parse {
            path: path.display().to_string(),
            line: i + 1,
            msg,
        };
        let (token, weight) = line
            .split_once('\t')
            .ok_or_else(|| err("expected token<TAB>weight".into()))?;
        let weight: f64 = weight
            .parse()
            .map_err(|_| err(format!("weight is not a number: {weight:?}")))?;
        lexicon.push(LexiconEntry {
            token: token.to_string(),
            weight,
        });
    }
    Ok(lexicon)
}

/// Segmentation dictionary file: one token per line, loadable by
/// [`crate::textprep::Dictionary::load`].
pub fn write_dictionary<P: AsRef<Path>>(path: P, lexicon: &[LexiconEntry]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for entry in lexicon {
        writeln!(w, "{}", entry.token)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::textprep::{load_token_lines, segment, Dictionary};
    use std::collections::{HashMap, HashSet};

    fn params() -> SynthParams {
        SynthParams {
            corpus_size: 50,
            lexicon_size: 6,
            noise: 0.3,
        }
    }

    #[test]
    fn label_rule_matches_the_closed_form() {
        assert_eq!(rating_from_mean_weight(1.0, 0.0), 5.0);
        assert_eq!(rating_from_mean_weight(0.0, 0.0), 2.5);
        assert_eq!(rating_from_mean_weight(-1.0, 0.0), 0.0);
        assert_eq!(rating_from_mean_weight(1.0, 3.0), 5.0);
        assert_eq!(rating_from_mean_weight(-1.0, -2.0), 0.0);
        assert!((rating_from_mean_weight(0.2, 0.1) - 3.1).abs() < 1e-12);
    }

    #[test]
    fn same_seed_reproduces_the_corpus_exactly() {
        let a = generate_synthetic_corpus(&params(), 77).unwrap();
        let b = generate_synthetic_corpus(&params(), 77).unwrap();
        assert_eq!(a.lexicon, b.lexicon);
        assert_eq!(a.reviews.len(), b.reviews.len());
        for (ra, rb) in a.reviews.iter().zip(&b.reviews) {
            assert_eq!(ra.user_id, rb.user_id);
            assert_eq!(ra.text, rb.text);
            assert_eq!(ra.rating.to_bits(), rb.rating.to_bits());
        }
    }

    #[test]
    fn degenerate_parameters_are_rejected() {
        let mut p = params();
        p.corpus_size = 9;
        assert!(generate_synthetic_corpus(&p, 0).is_err());
        let mut p = params();
        p.lexicon_size = 0;
        assert!(generate_synthetic_corpus(&p, 0).is_err());
        let mut p = params();
        p.noise = -0.1;
        assert!(generate_synthetic_corpus(&p, 0).is_err());
    }

    #[test]
    fn lexicon_has_the_documented_shape() {
        let corpus = generate_synthetic_corpus(&params(), 5).unwrap();
        let k = params().lexicon_size;
        assert_eq!(corpus.lexicon.len(), 4 * k);
        assert!(corpus.lexicon[..k].iter().all(|e| e.weight == 1.0));
        assert!(corpus.lexicon[k..2 * k].iter().all(|e| e.weight == -1.0));
        assert!(corpus.lexicon[2 * k..].iter().all(|e| e.weight == 0.0));
        let distinct: HashSet<&str> =
            corpus.lexicon.iter().map(|e| e.token.as_str()).collect();
        assert_eq!(distinct.len(), 4 * k);
        assert!(corpus
            .lexicon
            .iter()
            .all(|e| e.token.chars().count() == 2));
    }

    #[test]
    fn at_zero_noise_every_rating_matches_its_tokens() {
        let mut p = params();
        p.noise = 0.0;
        let corpus = generate_synthetic_corpus(&p, 13).unwrap();
        let weights: HashMap<&str, f64> = corpus
            .lexicon
            .iter()
            .map(|e| (e.token.as_str(), e.weight))
            .collect();
        let dict = Dictionary::new(corpus.lexicon.iter().map(|e| e.token.clone()));
        for review in &corpus.reviews {
            let tokens = segment(&review.text, &dict);
            let mean = tokens
                .iter()
                .map(|t| weights[t.as_str()])
                .sum::<f64>()
                / tokens.len() as f64;
            let expected = rating_from_mean_weight(mean, 0.0);
            assert!(
                (review.rating - expected).abs() < 1e-12,
                "rating {} vs rule {expected}",
                review.rating
            );
        }
    }

    #[test]
    fn ratings_stay_in_range_even_with_heavy_noise() {
        let mut p = params();
        p.noise = 5.0;
        let corpus = generate_synthetic_corpus(&p, 99).unwrap();
        assert_eq!(corpus.reviews.len(), p.corpus_size);
        for review in &corpus.reviews {
            assert!((0.0..=5.0).contains(&review.rating));
        }
    }

    #[test]
    fn generated_text_segments_back_into_generated_tokens() {
        let corpus = generate_synthetic_corpus(&params(), 31).unwrap();
        let dict = Dictionary::new(corpus.lexicon.iter().map(|e| e.token.clone()));
        let vocab: HashSet<&str> = corpus.lexicon.iter().map(|e| e.token.as_str()).collect();
        for review in &corpus.reviews {
            let tokens = segment(&review.text, &dict);
            assert!(tokens.iter().all(|t| vocab.contains(t.as_str())));
            assert_eq!(tokens.concat(), review.text);
        }
    }

    #[test]
    fn lexicon_and_dictionary_files_round_trip() {
        let corpus = generate_synthetic_corpus(&params(), 8).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let lex_path = dir.path().join("lexicon.tsv");
        let dict_path = dir.path().join("dictionary.txt");
        write_lexicon(&lex_path, &corpus.lexicon).unwrap();
        write_dictionary(&dict_path, &corpus.lexicon).unwrap();
        let loaded = load_lexicon(&lex_path).unwrap();
        assert_eq!(loaded, corpus.lexicon);
        let dict = Dictionary::load(&dict_path).unwrap();
        assert!(corpus.lexicon.iter().all(|e| dict.contains(&e.token)));
        let tokens = load_token_lines(&dict_path).unwrap();
        assert_eq!(tokens.len(), corpus.lexicon.len());
    }
}
