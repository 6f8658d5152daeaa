//! Leave-one-out ranking evaluation: each held-out item is ranked against
//! its user's fixed negatives.

pub mod metrics;
pub mod report;

pub use metrics::{hr_at_k, mrr_at_k, ndcg_at_k, rank_position, reciprocal_rank, Metric};
pub use report::{MetricRow, MetricsReport};

use crate::dataio::{Domain, PairedDataset, Phase};
use crate::error::{Error, Result};
use crate::model::EtlModel;
use crate::numerics::{Matrix, SparseRow};

pub const DEFAULT_CUTOFFS: [usize; 2] = [5, 10];

/// Users scored per forward pass.
const EVAL_BATCH: usize = 256;

/// Anything that produces per-item scores for a batch of training rows.
pub trait Scorer {
    /// Returns a `rows.len() × n_items(d)` score matrix.
    fn score(&self, rows: &[&SparseRow], d: Domain) -> Result<Matrix>;
}

impl Scorer for EtlModel {
    fn score(&self, rows: &[&SparseRow], d: Domain) -> Result<Matrix> {
        EtlModel::score(self, rows, d)
    }
}

/// 1-based rank of every user's held-out item, per domain.
pub fn rank_users(
    scorer: &dyn Scorer,
    ds: &PairedDataset,
    phase: Phase,
) -> Result<[Vec<usize>; 2]> {
    let mut out: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
    for d in Domain::BOTH {
        let dd = ds.domain(d);
        let rows: Vec<&SparseRow> = dd.train.rows().iter().collect();
        let ranks = &mut out[d.index()];
        ranks.reserve(rows.len());
        for (chunk_idx, chunk) in rows.chunks(EVAL_BATCH).enumerate() {
            let scores = scorer.score(chunk, d).map_err(|e| match e {
                Error::InvalidShape(msg) => Error::Evaluation(msg),
                other => other,
            })?;
            if scores.shape() != (chunk.len(), dd.n_items()) {
                return Err(Error::Evaluation(format!(
                    "scorer returned {:?} for {} users × {} items",
                    scores.shape(),
                    chunk.len(),
                    dd.n_items()
                )));
            }
            for i in 0..chunk.len() {
                let u = chunk_idx * EVAL_BATCH + i;
                ranks.push(rank_position(
                    scores.row(i),
                    dd.target(phase, u),
                    dd.negatives(phase, u),
                )?);
            }
        }
    }
    Ok(out)
}

/// Per-domain means of HR/NDCG/MRR at each cutoff from precomputed ranks.
pub fn report_from_ranks(
    ranks: &[Vec<usize>; 2],
    phase: Phase,
    cutoffs: &[usize],
) -> Result<MetricsReport> {
    if cutoffs.is_empty() || cutoffs.contains(&0) {
        return Err(Error::Evaluation(format!("invalid cutoffs {cutoffs:?}")));
    }
    let n_users = ranks[0].len();
    if ranks[1].len() != n_users {
        return Err(Error::Evaluation(
            "domains were ranked over different users".into(),
        ));
    }
    let mut report = MetricsReport::new(phase, n_users, cutoffs.to_vec());
    for d in Domain::BOTH {
        let r = &ranks[d.index()];
        let n = r.len().max(1) as f64;
        for metric in Metric::ALL {
            for &k in cutoffs {
                let mean = r.iter().map(|&p| metric.at(p, k)).sum::<f64>() / n;
                report.push(d, metric, k, mean);
            }
        }
        report.mrr_full[d.index()] = r.iter().map(|&p| reciprocal_rank(p)).sum::<f64>() / n;
    }
    Ok(report)
}

/// Scores every user in eval mode and reports metric means per domain.
pub fn evaluate(
    scorer: &dyn Scorer,
    ds: &PairedDataset,
    phase: Phase,
    cutoffs: &[usize],
) -> Result<MetricsReport> {
    let ranks = rank_users(scorer, ds, phase)?;
    let mut report = report_from_ranks(&ranks, phase, cutoffs)?;
    report.seed = ds.meta.seed;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::{loo_split, InteractionMatrix, SplitOptions};

    fn dataset(users: usize) -> PairedDataset {
        let ut: Vec<String> = (0..users).map(|u| format!("u{u:04}")).collect();
        let it: Vec<String> = (0..150).map(|i| format!("i{i:03}")).collect();
        let rows: Vec<SparseRow> = (0..users)
            .map(|u| {
                SparseRow::binary(
                    150,
                    (0..5)
                        .map(|k| ((u * 7 + k * 13) % 150) as u32)
                        .collect::<std::collections::BTreeSet<_>>()
                        .into_iter()
                        .collect(),
                )
                .unwrap()
            })
            .collect();
        let m = InteractionMatrix::new(ut, it, rows).unwrap();
        loo_split(
            &m,
            &m,
            &SplitOptions {
                seed: 2,
                ..SplitOptions::default()
            },
        )
        .unwrap()
    }

    /// Puts each user's held-out item far above everything else.
    struct Oracle<'a>(&'a PairedDataset, Phase);

    impl Scorer for Oracle<'_> {
        fn score(&self, rows: &[&SparseRow], d: Domain) -> Result<Matrix> {
            let dd = self.0.domain(d);
            let mut m = Matrix::zeros(rows.len(), dd.n_items());
            for (i, row) in rows.iter().enumerate() {
                let u = dd
                    .train
                    .rows()
                    .iter()
                    .position(|r| std::ptr::eq(r, *row))
                    .unwrap();
                m.set(i, dd.target(self.1, u) as usize, 1e30);
            }
            Ok(m)
        }
    }

    #[test]
    fn oracle_scorer_hits_everything() {
        let ds = dataset(30);
        let r = evaluate(
            &Oracle(&ds, Phase::Test),
            &ds,
            Phase::Test,
            &DEFAULT_CUTOFFS,
        )
        .unwrap();
        for d in Domain::BOTH {
            assert_eq!(r.get(d, Metric::Hr, 5), Some(1.0));
            assert_eq!(r.get(d, Metric::Ndcg, 10), Some(1.0));
        }
    }

    struct Constant;

    impl Scorer for Constant {
        fn score(&self, rows: &[&SparseRow], _d: Domain) -> Result<Matrix> {
            Ok(Matrix::zeros(rows.len(), 3))
        }
    }

    #[test]
    fn wrong_score_width_is_evaluation_error() {
        let ds = dataset(5);
        assert!(matches!(
            evaluate(&Constant, &ds, Phase::Val, &DEFAULT_CUTOFFS),
            Err(Error::Evaluation(_))
        ));
    }

    #[test]
    fn cutoff_monotonicity() {
        let ranks = [vec![1, 4, 7, 12, 60], vec![2, 5, 9, 10, 100]];
        let r = report_from_ranks(&ranks, Phase::Val, &[5, 10]).unwrap();
        for d in Domain::BOTH {
            for m in Metric::ALL {
                assert!(r.get(d, m, 10).unwrap() >= r.get(d, m, 5).unwrap());
            }
            assert!(r.mrr_full[d.index()] >= r.get(d, Metric::Mrr, 10).unwrap());
        }
    }
}
