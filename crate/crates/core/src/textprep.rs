//! Segmentation, stop-word removal, vocabulary construction, and encoding.
//!
//! Cleaned review text is segmented by maximum forward matching against a
//! user-supplied dictionary, stripped of stop words, and encoded against a
//! frequency-ordered vocabulary: id 0 is reserved for padding, id 1 for
//! out-of-vocabulary tokens, and content tokens get ids from 2 upward with
//! more frequent words receiving smaller ids. Sequences are pre-padded or
//! head-truncated to a fixed length; ratings are normalized to [0,1].

use std::collections::{HashMap, HashSet};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::{Error, Result};

/// Reserved id for padding positions.
pub const PAD_ID: usize = 0;
/// Reserved id for out-of-vocabulary tokens.
pub const OOV_ID: usize = 1;

/// Literal used for the PAD row in vocabulary files.
pub const PAD_LITERAL: &str = "<PAD>";
/// Literal used for the OOV row in vocabulary files.
pub const OOV_LITERAL: &str = "<OOV>";

/// Reads a token-per-line UTF-8 file. Blank lines and lines starting with
/// `#` are ignored; surrounding whitespace is trimmed.
pub fn load_token_lines(path: &Path) -> Result<Vec<String>> {
    let file = std::fs::File::open(path)?;
    let mut tokens = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line?;
        let token = line.trim();
        if token.is_empty() || token.starts_with('#') {
            continue;
        }
        tokens.push(token.to_string());
    }
    Ok(tokens)
}

/// Segmentation dictionary: a word set plus the longest word length in
/// characters, which bounds the forward-matching window.
#[derive(Clone, Debug, Default)]
pub struct Dictionary {
    words: HashSet<String>,
    max_chars: usize,
}

impl Dictionary {
    pub fn new<I: IntoIterator<Item = String>>(words: I) -> Self {
        let words: HashSet<String> = words.into_iter().collect();
        let max_chars = words.iter().map(|w| w.chars().count()).max().unwrap_or(0);
        Dictionary { words, max_chars }
    }

    /// Empty dictionary: segmentation degenerates to single characters.
    pub fn empty() -> Self {
        Dictionary::default()
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(Dictionary::new(load_token_lines(path)?))
    }

    pub fn contains(&self, word: &str) -> bool {
        self.words.contains(word)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

/// Maximum forward matching: scan left to right, at each position emit the
/// longest dictionary word starting there, falling back to the single
/// character. The output tokens concatenate back to the input exactly.
pub fn segment(text: &str, dict: &Dictionary) -> Vec<String> {
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let window = dict.max_chars.min(chars.len() - i);
        let mut matched = 0;
        // Length-1 dictionary words coincide with the fallback, so only
        // lengths ≥ 2 need a lookup.
        for len in (2..=window).rev() {
            let candidate: String = chars[i..i + len].iter().collect();
            if dict.contains(&candidate) {
                tokens.push(candidate);
                matched = len;
                break;
            }
        }
        if matched == 0 {
            tokens.push(chars[i].to_string());
            matched = 1;
        }
        i += matched;
    }
    tokens
}

/// Stop-word list.
#[derive(Clone, Debug, Default)]
pub struct Stoplist {
    words: HashSet<String>,
}

impl Stoplist {
    pub fn new<I: IntoIterator<Item = String>>(words: I) -> Self {
        Stoplist {
            words: words.into_iter().collect(),
        }
    }

    pub fn empty() -> Self {
        Stoplist::default()
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(Stoplist::new(load_token_lines(path)?))
    }

    pub fn contains(&self, word: &str) -> bool {
        self.words.contains(word)
    }
}

/// Removes stop-listed tokens, preserving the order of survivors.
pub fn remove_stopwords(tokens: Vec<String>, stoplist: &Stoplist) -> Vec<String> {
    tokens
        .into_iter()
        .filter(|t| !stoplist.contains(t))
        .collect()
}

/// The tokenization assets applied to every text in one pipeline run.
#[derive(Clone, Debug, Default)]
pub struct Preprocessor {
    pub dictionary: Dictionary,
    pub stoplist: Stoplist,
}

impl Preprocessor {
    /// Segments, drops whitespace-only tokens (cleaned text separates words
    /// with single spaces, which segmentation passes through), and removes
    /// stop words.
    pub fn tokens(&self, text: &str) -> Vec<String> {
        let tokens = segment(text, &self.dictionary)
            .into_iter()
            .filter(|t| !t.chars().all(char::is_whitespace))
            .collect();
        remove_stopwords(tokens, &self.stoplist)
    }
}

/// Frequency-ordered vocabulary with reserved PAD and OOV ids.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    /// Content tokens in id order; element k has id k + 2.
    entries: Vec<(String, u64)>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    fn from_entries(entries: Vec<(String, u64)>) -> Self {
        let index = entries
            .iter()
            .enumerate()
            .map(|(k, (token, _))| (token.clone(), k + 2))
            .collect();
        Vocabulary { entries, index }
    }

    /// Total size including PAD and OOV.
    pub fn size(&self) -> usize {
        self.entries.len() + 2
    }

    /// Maps a token to its id, or OOV for unknown tokens.
    pub fn id_of(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(OOV_ID)
    }

    /// Content-token frequencies in id order (non-increasing).
    pub fn content_frequencies(&self) -> Vec<u64> {
        self.entries.iter().map(|(_, f)| *f).collect()
    }

    /// (token, id, frequency) rows for content tokens, in id order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, usize, u64)> {
        self.entries
            .iter()
            .enumerate()
            .map(|(k, (token, freq))| (token.as_str(), k + 2, *freq))
    }

    fn to_tsv(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("{PAD_LITERAL}\t{PAD_ID}\t0\n"));
        out.push_str(&format!("{OOV_LITERAL}\t{OOV_ID}\t0\n"));
        for (token, id, freq) in self.iter() {
            out.push_str(&format!("{token}\t{id}\t{freq}\n"));
        }
        out
    }

    /// Writes the tab-separated `token<TAB>id<TAB>frequency` file, sorted
    /// by id, with the PAD and OOV literals first.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
        file.write_all(self.to_tsv().as_bytes())?;
        file.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let parse_err = |line: usize, msg: String| Error::Parse {
            path: path.display().to_string(),
            line,
            msg,
        };
        let file = std::fs::File::open(path)?;
        let mut entries = Vec::new();
        let mut next_id = 0usize;
        for (idx, line) in BufReader::new(file).lines().enumerate() {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 3 {
                return Err(parse_err(idx + 1, "expected token<TAB>id<TAB>frequency".into()));
            }
            let id: usize = fields[1]
                .parse()
                .map_err(|e| parse_err(idx + 1, format!("bad id: {e}")))?;
            let freq: u64 = fields[2]
                .parse()
                .map_err(|e| parse_err(idx + 1, format!("bad frequency: {e}")))?;
            if id != next_id {
                return Err(parse_err(
                    idx + 1,
                    format!("ids must be consecutive; expected {next_id}, found {id}"),
                ));
            }
            match id {
                PAD_ID if fields[0] != PAD_LITERAL => {
                    return Err(parse_err(idx + 1, format!("id 0 must be {PAD_LITERAL}")));
                }
                OOV_ID if fields[0] != OOV_LITERAL => {
                    return Err(parse_err(idx + 1, format!("id 1 must be {OOV_LITERAL}")));
                }
                PAD_ID | OOV_ID => {}
                _ => entries.push((fields[0].to_string(), freq)),
            }
            next_id += 1;
        }
        if next_id < 2 {
            return Err(parse_err(0, "vocabulary file missing PAD/OOV rows".into()));
        }
        for k in 1..entries.len() {
            if entries[k].1 > entries[k - 1].1 {
                return Err(parse_err(
                    k + 3,
                    "content frequencies must be non-increasing".into(),
                ));
            }
        }
        Ok(Vocabulary::from_entries(entries))
    }

    /// Hex SHA-256 of the serialized vocabulary; stored in checkpoints so a
    /// model is never silently paired with a different vocabulary.
    pub fn digest(&self) -> String {
        let hash = Sha256::digest(self.to_tsv().as_bytes());
        hash.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Counts tokens over the corpus and keeps the `max_content_tokens` most
/// frequent, breaking frequency ties by first occurrence. Content ids are
/// assigned 2, 3, … in that order.
pub fn build_vocab(corpus: &[Vec<String>], max_content_tokens: usize) -> Result<Vocabulary> {
    if max_content_tokens == 0 {
        return Err(Error::InvalidArgument(
            "max_content_tokens must be at least 1".into(),
        ));
    }
    let mut counts: HashMap<&str, (u64, usize)> = HashMap::new();
    let mut order = 0usize;
    for tokens in corpus {
        for token in tokens {
            let entry = counts.entry(token.as_str()).or_insert_with(|| {
                order += 1;
                (0, order)
            });
            entry.0 += 1;
        }
    }
    if counts.is_empty() {
        return Err(Error::InvalidArgument(
            "cannot build a vocabulary from an empty corpus".into(),
        ));
    }
    let mut ranked: Vec<(&str, u64, usize)> = counts
        .into_iter()
        .map(|(token, (freq, first))| (token, freq, first))
        .collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.2.cmp(&b.2)));
    ranked.truncate(max_content_tokens);
    Ok(Vocabulary::from_entries(
        ranked
            .into_iter()
            .map(|(token, freq, _)| (token.to_string(), freq))
            .collect(),
    ))
}

fn check_frequencies(frequencies: &[u64]) -> Result<()> {
    if frequencies.is_empty() {
        return Err(Error::InvalidArgument(
            "coverage needs at least one frequency".into(),
        ));
    }
    for k in 0..frequencies.len() {
        if frequencies[k] == 0 {
            return Err(Error::InvalidArgument("frequencies must be positive".into()));
        }
        if k > 0 && frequencies[k] > frequencies[k - 1] {
            return Err(Error::InvalidArgument(
                "frequencies must be non-increasing".into(),
            ));
        }
    }
    Ok(())
}

/// Coverage of the top-k words for every k: (sum of top-k counts) / total.
/// Non-decreasing, and exactly 1.0 at the full vocabulary size.
pub fn coverage_curve(frequencies: &[u64]) -> Result<Vec<(usize, f64)>> {
    check_frequencies(frequencies)?;
    let total: u64 = frequencies.iter().sum();
    let mut curve = Vec::with_capacity(frequencies.len());
    let mut prefix = 0u64;
    for (k, &freq) in frequencies.iter().enumerate() {
        prefix += freq;
        curve.push((k + 1, prefix as f64 / total as f64));
    }
    Ok(curve)
}

/// Smallest k whose coverage reaches `threshold`.
pub fn min_vocab_for_coverage(frequencies: &[u64], threshold: f64) -> Result<usize> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "coverage threshold {threshold} outside (0, 1]"
        )));
    }
    check_frequencies(frequencies)?;
    let total: u64 = frequencies.iter().sum();
    let mut prefix = 0u64;
    for (k, &freq) in frequencies.iter().enumerate() {
        prefix += freq;
        if prefix as f64 / total as f64 >= threshold {
            return Ok(k + 1);
        }
    }
    // Unreachable: the final prefix ratio is exactly 1.0 ≥ threshold.
    Ok(frequencies.len())
}

/// Maps tokens to ids, substituting OOV for unknown tokens.
pub fn encode(tokens: &[String], vocab: &Vocabulary) -> Vec<usize> {
    tokens.iter().map(|t| vocab.id_of(t)).collect()
}

/// A review encoded to fixed length `L`: PAD ids fill positions before
/// `L − true_length` (pre-padding); over-long inputs keep their first L ids.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TokenSequence {
    pub ids: Vec<usize>,
    pub true_length: usize,
}

/// Pre-pads with PAD=0 or head-truncates to exactly `l` ids.
pub fn pad_truncate(ids: &[usize], l: usize) -> Result<TokenSequence> {
    if l == 0 {
        return Err(Error::InvalidArgument("sequence length must be ≥ 1".into()));
    }
    if ids.is_empty() {
        return Err(Error::InvalidArgument(
            "cannot pad an empty id sequence; empty reviews are dropped upstream".into(),
        ));
    }
    if ids.len() >= l {
        Ok(TokenSequence {
            ids: ids[..l].to_vec(),
            true_length: l,
        })
    } else {
        let mut padded = vec![PAD_ID; l - ids.len()];
        padded.extend_from_slice(ids);
        Ok(TokenSequence {
            ids: padded,
            true_length: ids.len(),
        })
    }
}

/// Maps a 0–5 rating to the model's [0,1] label scale.
pub fn normalize_label(rating: f64) -> Result<f64> {
    if !rating.is_finite() || !(0.0..=5.0).contains(&rating) {
        return Err(Error::InvalidArgument(format!(
            "rating {rating} outside [0, 5]"
        )));
    }
    Ok(rating / 5.0)
}

/// Maps a model output back to the rating scale, clamping into [0,1] first.
pub fn denormalize(value: f64) -> f64 {
    value.clamp(0.0, 1.0) * 5.0
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dict(words: &[&str]) -> Dictionary {
        Dictionary::new(words.iter().map(|w| w.to_string()))
    }

    fn toks(words: &[&str]) -> Vec<String> {
        words.iter().map(|w| w.to_string()).collect()
    }

    #[test]
    fn segment_prefers_longest_match() {
        let d = dict(&["充电", "充电桩", "很", "方便"]);
        assert_eq!(segment("充电桩很方便", &d), toks(&["充电桩", "很", "方便"]));
    }

    #[test]
    fn segment_empty_dictionary_falls_back_to_chars() {
        assert_eq!(segment("好", &Dictionary::empty()), toks(&["好"]));
        assert_eq!(
            segment("你好", &Dictionary::empty()),
            toks(&["你", "好"])
        );
    }

    #[test]
    fn segment_greedy_scan() {
        assert_eq!(segment("abcd", &dict(&["ab", "cd"])), toks(&["ab", "cd"]));
        // Greedy: "abc" wins at position 0 even though it splits "cd".
        assert_eq!(
            segment("abcd", &dict(&["abc", "cd"])),
            toks(&["abc", "d"])
        );
    }

    #[test]
    fn segment_concatenates_to_input() {
        let d = dict(&["充电桩", "方便", "ab"]);
        for text in ["充电桩很方便", "abab xy", "", "好 好"] {
            let joined: String = segment(text, &d).concat();
            assert_eq!(joined, text);
        }
    }

    #[test]
    fn stopword_removal() {
        let stop = Stoplist::new(toks(&["是", "的"]));
        assert_eq!(
            remove_stopwords(toks(&["充电桩", "是", "方便"]), &stop),
            toks(&["充电桩", "方便"])
        );
        assert_eq!(
            remove_stopwords(toks(&["好"]), &Stoplist::empty()),
            toks(&["好"])
        );
        assert_eq!(remove_stopwords(toks(&["的", "的"]), &stop), toks(&[]));
    }

    #[test]
    fn preprocessor_drops_space_tokens() {
        let pre = Preprocessor {
            dictionary: dict(&["很好"]),
            stoplist: Stoplist::new(toks(&["的"])),
        };
        assert_eq!(pre.tokens("很好 的 5"), toks(&["很好", "5"]));
    }

    #[test]
    fn vocab_orders_by_frequency() {
        let corpus = vec![
            toks(&["好", "好", "好", "差", "慢"]),
            toks(&["好", "好", "差", "差"]),
        ];
        let vocab = build_vocab(&corpus, 2).unwrap();
        assert_eq!(vocab.id_of("好"), 2);
        assert_eq!(vocab.id_of("差"), 3);
        assert_eq!(vocab.id_of("慢"), OOV_ID); // truncated out
        assert_eq!(vocab.size(), 4);
        assert_eq!(vocab.content_frequencies(), vec![5, 3]);
    }

    #[test]
    fn vocab_single_token() {
        let vocab = build_vocab(&[toks(&["词"])], 10).unwrap();
        assert_eq!(vocab.id_of("词"), 2);
        assert_eq!(vocab.size(), 3);
    }

    #[test]
    fn vocab_tie_break_is_first_occurrence() {
        let corpus = vec![toks(&["乙", "甲", "乙", "甲"])];
        let vocab = build_vocab(&corpus, 10).unwrap();
        assert_eq!(vocab.id_of("乙"), 2);
        assert_eq!(vocab.id_of("甲"), 3);
    }

    #[test]
    fn vocab_empty_corpus_is_error() {
        assert!(build_vocab(&[], 5).is_err());
        assert!(build_vocab(&[Vec::new()], 5).is_err());
    }

    #[test]
    fn coverage_examples() {
        assert_eq!(
            coverage_curve(&[5, 3, 1, 1]).unwrap(),
            vec![(1, 0.5), (2, 0.8), (3, 0.9), (4, 1.0)]
        );
        assert_eq!(coverage_curve(&[7]).unwrap(), vec![(1, 1.0)]);
        assert!(coverage_curve(&[]).is_err());
        assert!(coverage_curve(&[1, 2]).is_err()); // increasing
        assert!(coverage_curve(&[2, 0]).is_err()); // zero count
    }

    #[test]
    fn min_vocab_examples() {
        assert_eq!(min_vocab_for_coverage(&[5, 3, 1, 1], 0.95).unwrap(), 4);
        assert_eq!(min_vocab_for_coverage(&[5, 3, 1, 1], 0.5).unwrap(), 1);
        assert_eq!(min_vocab_for_coverage(&[5, 3, 1, 1], 1.0).unwrap(), 4);
        assert!(min_vocab_for_coverage(&[5], 0.0).is_err());
        assert!(min_vocab_for_coverage(&[5], 1.5).is_err());
    }

    #[test]
    fn encode_uses_oov_for_unknowns() {
        let vocab = build_vocab(&[toks(&["好", "好", "差"])], 10).unwrap();
        assert_eq!(encode(&toks(&["好", "差"]), &vocab), vec![2, 3]);
        assert_eq!(encode(&toks(&["新词"]), &vocab), vec![OOV_ID]);
        assert_eq!(encode(&[], &vocab), Vec::<usize>::new());
    }

    #[test]
    fn pad_truncate_behavior() {
        let seq = pad_truncate(&[5, 7], 4).unwrap();
        assert_eq!(seq.ids, vec![0, 0, 5, 7]);
        assert_eq!(seq.true_length, 2);

        let long: Vec<usize> = (1..=150).collect();
        let seq = pad_truncate(&long, 100).unwrap();
        assert_eq!(seq.ids, (1..=100).collect::<Vec<_>>());
        assert_eq!(seq.true_length, 100);

        let exact: Vec<usize> = (1..=100).collect();
        let seq = pad_truncate(&exact, 100).unwrap();
        assert_eq!(seq.ids, exact);
        assert_eq!(seq.true_length, 100);

        assert!(pad_truncate(&[], 100).is_err());
        assert!(pad_truncate(&[1], 0).is_err());
    }

    #[test]
    fn label_normalization() {
        assert_eq!(normalize_label(4.5).unwrap(), 0.9);
        assert_eq!(normalize_label(0.0).unwrap(), 0.0);
        assert_eq!(normalize_label(5.0).unwrap(), 1.0);
        assert!(normalize_label(5.1).is_err());
        assert!(normalize_label(-0.1).is_err());
        assert_eq!(denormalize(1.2), 5.0);
        assert_eq!(denormalize(0.5), 2.5);
        assert_eq!(denormalize(-0.1), 0.0);
    }

    #[test]
    fn vocab_roundtrip_and_digest() {
        let corpus = vec![toks(&["好", "好", "差", "慢"])];
        let vocab = build_vocab(&corpus, 10).unwrap();
        let path = tempfile::Builder::new()
            .suffix(".tsv")
            .tempfile()
            .unwrap()
            .into_temp_path();
        vocab.save(&path).unwrap();

        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("<PAD>\t0\t0\n<OOV>\t1\t0\n"));

        let loaded = Vocabulary::load(&path).unwrap();
        assert_eq!(loaded, vocab);
        assert_eq!(loaded.digest(), vocab.digest());
        assert_eq!(vocab.digest().len(), 64);
    }

    #[test]
    fn vocab_load_rejects_gaps() {
        let path = tempfile::Builder::new()
            .suffix(".tsv")
            .tempfile()
            .unwrap()
            .into_temp_path();
        std::fs::write(&path, "<PAD>\t0\t0\n<OOV>\t1\t0\n好\t3\t5\n").unwrap();
        assert!(Vocabulary::load(&path).is_err());
    }
}
