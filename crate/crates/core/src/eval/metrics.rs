use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Metric {
    Hr,
    Ndcg,
    Mrr,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::Hr, Metric::Ndcg, Metric::Mrr];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Hr => "hr",
            Metric::Ndcg => "ndcg",
            Metric::Mrr => "mrr",
        }
    }

    pub fn at(self, pos: usize, k: usize) -> f64 {
        match self {
            Metric::Hr => hr_at_k(pos, k),
            Metric::Ndcg => ndcg_at_k(pos, k),
            Metric::Mrr => mrr_at_k(pos, k),
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Metric::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown metric `{s}`")))
    }
}

/// 1-based rank of `target` among `{target} ∪ negatives` by descending score.
/// Ties go to the smaller item id.
///
/// `scores` is indexed by item id.
pub fn rank_position(scores: &[f32], target: u32, negatives: &[u32]) -> Result<usize> {
    let score = |item: u32| -> Result<f32> {
        match scores.get(item as usize) {
            Some(&s) if !s.is_nan() => Ok(s),
            Some(_) => Err(Error::Evaluation(format!("score of item {item} is NaN"))),
            None => Err(Error::Evaluation(format!("no score for item {item}"))),
        }
    };
    let st = score(target)?;
    let mut pos = 1;
    for &j in negatives {
        if j == target {
            return Err(Error::Evaluation(format!(
                "target {target} is also a negative"
            )));
        }
        let sj = score(j)?;
        if sj > st || (sj == st && j < target) {
            pos += 1;
        }
    }
    Ok(pos)
}

pub fn hr_at_k(pos: usize, k: usize) -> f64 {
    if pos <= k {
        1.0
    } else {
        0.0
    }
}

/// Single relevant item, so the ideal DCG is 1.
pub fn ndcg_at_k(pos: usize, k: usize) -> f64 {
    if pos <= k {
        1.0 / ((pos + 1) as f64).log2()
    } else {
        0.0
    }
}

pub fn mrr_at_k(pos: usize, k: usize) -> f64 {
    if pos <= k {
        1.0 / pos as f64
    } else {
        0.0
    }
}

/// Reciprocal rank without a cutoff.
pub fn reciprocal_rank(pos: usize) -> f64 {
    1.0 / pos as f64
}
