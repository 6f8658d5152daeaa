//! Rating-log ingestion and binarization.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct RatingRecord {
    pub user: String,
    pub item: String,
    pub rating: f32,
    pub timestamp: i64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RawRatings {
    pub records: Vec<RatingRecord>,
    /// Lines that failed to parse or violated the rating range.
    pub skipped: usize,
}

/// A positive implicit interaction.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Interaction {
    pub user: String,
    pub item: String,
}

impl Interaction {
    pub fn new(user: impl Into<String>, item: impl Into<String>) -> Self {
        Interaction {
            user: user.into(),
            item: item.into(),
        }
    }
}

/// Largest tolerated fraction of malformed lines.
pub const MAX_MALFORMED_FRACTION: f64 = 0.01;

/// Reads a `user,item,rating,timestamp` file.
pub fn load_interactions(path: impl AsRef<Path>) -> Result<RawRatings> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_ratings(BufReader::new(file)).map_err(|e| match e {
        Error::Format(msg) => Error::Format(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn parse_ratings<R: BufRead>(reader: R) -> Result<RawRatings> {
    let mut out = RawRatings::default();
    let mut lines = 0usize;
    for line in reader.lines() {
        let line = line.map_err(|e| Error::io("<ratings>", e))?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        lines += 1;
        match parse_line(line) {
            Some(rec) => out.records.push(rec),
            None => out.skipped += 1,
        }
    }
    if lines > 0 && out.skipped as f64 > MAX_MALFORMED_FRACTION * lines as f64 {
        return Err(Error::Format(format!(
            "{} of {lines} lines malformed (limit {:.0}%)",
            out.skipped,
            MAX_MALFORMED_FRACTION * 100.0
        )));
    }
    Ok(out)
}

fn parse_line(line: &str) -> Option<RatingRecord> {
    let mut fields = line.split(',');
    let user = fields.next()?.trim();
    let item = fields.next()?.trim();
    let rating: f32 = fields.next()?.trim().parse().ok()?;
    let timestamp: i64 = fields.next()?.trim().parse().ok()?;
    if fields.next().is_some() || user.is_empty() || item.is_empty() {
        return None;
    }
    if !(0.0..=5.0).contains(&rating) {
        return None;
    }
    Some(RatingRecord {
        user: user.to_string(),
        item: item.to_string(),
        rating,
        timestamp,
    })
}

/// Keeps ratings `>= threshold` as positives; duplicate pairs collapse.
/// Output is sorted by (user, item).
pub fn binarize(raw: &RawRatings, threshold: f32) -> Result<Vec<Interaction>> {
    if !(threshold > 0.0 && threshold <= 5.0) {
        return Err(Error::Config(format!(
            "binarize threshold {threshold} outside (0, 5]"
        )));
    }
    let set: BTreeSet<Interaction> = raw
        .records
        .iter()
        .filter(|r| r.rating >= threshold)
        .map(|r| Interaction::new(r.user.clone(), r.item.clone()))
        .collect();
    Ok(set.into_iter().collect())
}
