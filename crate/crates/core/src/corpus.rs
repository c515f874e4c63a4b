//! Dataset ingestion and text cleaning.
//!
//! Raw reviews arrive as (user id, text, rating) records in either a
//! delimited (CSV) or record-per-line (JSON lines) file. Cleaning applies
//! three steps in order: HTML tag removal, special-character removal, and
//! per-user deduplication. Reviews whose text cleans down to nothing are
//! dropped and counted.

use std::collections::HashSet;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// A review as it appears in the input dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RawReview {
    pub user_id: String,
    pub text: String,
    pub rating: f64,
}

/// A review after the cleaning pipeline. Text is nonempty and contains only
/// letters, digits, and single interior spaces.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CleanReview {
    pub user_id: String,
    pub text: String,
    pub rating: f64,
}

/// On-disk dataset formats.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    /// CSV with header row `user_id,text,rating`.
    Delimited,
    /// One JSON object per line with those same fields.
    RecordPerLine,
}

impl Format {
    /// Parses a config value: `csv`, `jsonl`, or `auto` (detect by extension).
    pub fn from_config(value: &str, path: &Path) -> Result<Format> {
        match value {
            "csv" | "delimited" => Ok(Format::Delimited),
            "jsonl" | "ndjson" | "record-per-line" => Ok(Format::RecordPerLine),
            "auto" | "" => Format::detect(path),
            other => Err(Error::Config(format!(
                "unknown dataset format {other:?}; expected csv, jsonl, or auto"
            ))),
        }
    }

    /// Detects the format from the file extension.
    pub fn detect(path: &Path) -> Result<Format> {
        match path.extension().and_then(|e| e.to_str()) {
            Some("csv") => Ok(Format::Delimited),
            Some("jsonl") | Some("ndjson") | Some("json") => Ok(Format::RecordPerLine),
            _ => Err(Error::Config(format!(
                "cannot infer dataset format from {}; set format=csv or format=jsonl",
                path.display()
            ))),
        }
    }
}

/// Removes HTML tag spans. A `<` begins a tag only when some `>` follows
/// later in the text; a `<` with no closing `>` is literal text. Inner text
/// is concatenated in order.
///
/// Idempotent by construction: any `<` that survives has no `>` after it,
/// so a second pass finds no tag spans.
pub fn strip_html(text: &str) -> String {
    let chars: Vec<char> = text.chars().collect();
    let mut out = String::with_capacity(text.len());
    let mut i = 0;
    while i < chars.len() {
        if chars[i] == '<' {
            if let Some(offset) = chars[i + 1..].iter().position(|&c| c == '>') {
                i += offset + 2;
                continue;
            }
        }
        out.push(chars[i]);
        i += 1;
    }
    out
}

/// Keeps only letters and numeric characters; every maximal run of removed
/// characters (including existing whitespace) collapses to one interior
/// space. No leading or trailing spaces. Idempotent.
///
/// `is_numeric` spans the Unicode number categories, which keeps the
/// full-width digits common in Chinese review text.
pub fn strip_special_chars(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut pending_gap = false;
    for c in text.chars() {
        if c.is_alphabetic() || c.is_numeric() {
            if pending_gap && !out.is_empty() {
                out.push(' ');
            }
            out.push(c);
            pending_gap = false;
        } else {
            pending_gap = true;
        }
    }
    out
}

/// Both cleaning steps in order.
pub fn clean_text(text: &str) -> String {
    strip_special_chars(&strip_html(text))
}

/// Drops every review whose (user_id, cleaned text) key was already seen,
/// keeping first occurrences in their original order.
pub fn deduplicate(reviews: Vec<RawReview>) -> Vec<RawReview> {
    let mut seen: HashSet<(String, String)> = HashSet::new();
    reviews
        .into_iter()
        .filter(|r| seen.insert((r.user_id.clone(), clean_text(&r.text))))
        .collect()
}

/// Counters reported by [`clean_dataset`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct CleanStats {
    pub input: usize,
    pub dropped_duplicates: usize,
    pub dropped_empty: usize,
}

/// Full cleaning pipeline: strip tags and special characters, deduplicate
/// on (user_id, cleaned text), drop reviews that cleaned to empty text.
pub fn clean_dataset(reviews: Vec<RawReview>) -> (Vec<CleanReview>, CleanStats) {
    let mut stats = CleanStats {
        input: reviews.len(),
        ..CleanStats::default()
    };
    let deduped = deduplicate(reviews);
    stats.dropped_duplicates = stats.input - deduped.len();
    let mut out = Vec::with_capacity(deduped.len());
    for r in deduped {
        let text = clean_text(&r.text);
        if text.is_empty() {
            stats.dropped_empty += 1;
            continue;
        }
        out.push(CleanReview {
            user_id: r.user_id,
            text,
            rating: r.rating,
        });
    }
    (out, stats)
}

fn check_rating(rating: f64, path: &Path, line: usize) -> Result<()> {
    if !rating.is_finite() || !(0.0..=5.0).contains(&rating) {
        return Err(Error::Parse {
            path: path.display().to_string(),
            line,
            msg: format!("rating {rating} outside [0, 5]"),
        });
    }
    Ok(())
}

/// Loads a dataset file. Malformed records and out-of-range ratings are
/// rejected with their line number.
pub fn load_dataset(path: &Path, format: Format) -> Result<Vec<RawReview>> {
    match format {
        Format::RecordPerLine => load_jsonl(path),
        Format::Delimited => load_csv(path),
    }
}

fn load_jsonl(path: &Path) -> Result<Vec<RawReview>> {
    let file = std::fs::File::open(path)?;
    let mut reviews = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let review: RawReview = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.display().to_string(),
            line: idx + 1,
            msg: e.to_string(),
        })?;
        check_rating(review.rating, path, idx + 1)?;
        reviews.push(review);
    }
    Ok(reviews)
}

fn load_csv(path: &Path) -> Result<Vec<RawReview>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)?;
    let mut reviews = Vec::new();
    for record in reader.deserialize::<RawReview>() {
        let review = record.map_err(|e| {
            let line = e
                .position()
                .map(|p| p.line() as usize)
                .unwrap_or(reviews.len() + 2);
            Error::Parse {
                path: path.display().to_string(),
                line,
                msg: e.to_string(),
            }
        })?;
        // +2: one for the header row, one because data lines are 1-based.
        check_rating(review.rating, path, reviews.len() + 2)?;
        reviews.push(review);
    }
    Ok(reviews)
}

/// Writes a dataset in the requested format.
pub fn write_dataset(path: &Path, reviews: &[RawReview], format: Format) -> Result<()> {
    match format {
        Format::RecordPerLine => {
            let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
            for r in reviews {
                serde_json::to_writer(&mut file, r)
                    .map_err(|e| Error::Io(std::io::Error::other(e)))?;
                file.write_all(b"\n")?;
            }
            file.flush()?;
            Ok(())
        }
        Format::Delimited => {
            let mut writer = csv::Writer::from_path(path)?;
            for r in reviews {
                writer
                    .serialize(r)
                    .map_err(|e| Error::Io(std::io::Error::other(e)))?;
            }
            writer.flush()?;
            Ok(())
        }
    }
}
