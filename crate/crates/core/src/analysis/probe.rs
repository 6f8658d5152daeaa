//! Pairing probe: can a small classifier tell a user's own cross-domain
//! latent pair from a pair of two different users?

use crate::analysis::stats::auc;
use crate::error::{Error, Result};
use crate::numerics::{
    adam_update, bce_with_logits, AdamConfig, AdamState, ForwardMode, Matrix, Mlp2Input,
    Mlp2Params, OutputActivation, Rng,
};

pub const MIN_PROBE_USERS: usize = 5;

/// Examples `[z_a,i ‖ z_b,j]` labelled 1 iff `i = j`; one positive and one
/// negative per anchor user `i`. Both examples of an anchor land in the same
/// split.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbeDataset {
    pub features: Matrix,
    pub labels: Vec<f32>,
    /// `(anchor, partner)` user indices per example.
    pub pairs: Vec<(usize, usize)>,
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl ProbeDataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

pub fn build_probe(z_a: &Matrix, z_b: &Matrix, rng: &mut Rng) -> Result<ProbeDataset> {
    if z_a.rows() != z_b.rows() {
        return Err(Error::Analysis(format!(
            "probe latents cover {} and {} users",
            z_a.rows(),
            z_b.rows()
        )));
    }
    if z_a.cols() == 0 || z_b.cols() == 0 {
        return Err(Error::Analysis("probe latents have zero width".into()));
    }
    let n = z_a.rows();
    if n < MIN_PROBE_USERS {
        return Err(Error::TooFewUsers {
            needed: MIN_PROBE_USERS,
            got: n,
        });
    }
    let width = z_a.cols() + z_b.cols();
    let mut data = Vec::with_capacity(2 * n * width);
    let mut labels = Vec::with_capacity(2 * n);
    let mut pairs = Vec::with_capacity(2 * n);
    for i in 0..n {
        let mut j = rng.below(n - 1);
        if j >= i {
            j += 1;
        }
        for (partner, label) in [(i, 1.0), (j, 0.0)] {
            data.extend_from_slice(z_a.row(i));
            data.extend_from_slice(z_b.row(partner));
            labels.push(label);
            pairs.push((i, partner));
        }
    }
    let features = Matrix::from_vec(2 * n, width, data)?;

    let mut users: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut users);
    let n_train = (n as f64 * 0.6).round() as usize;
    let n_val = (n as f64 * 0.2).round() as usize;
    let examples = |us: &[usize]| -> Vec<usize> {
        let mut v: Vec<usize> = us.iter().flat_map(|&u| [2 * u, 2 * u + 1]).collect();
        v.sort_unstable();
        v
    };
    Ok(ProbeDataset {
        features,
        labels,
        pairs,
        train: examples(&users[..n_train]),
        val: examples(&users[n_train..n_train + n_val]),
        test: examples(&users[n_train + n_val..]),
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProbeOptions {
    pub hidden: usize,
    pub epochs: usize,
    pub lr: f64,
    pub batch: usize,
}

impl Default for ProbeOptions {
    fn default() -> Self {
        ProbeOptions {
            hidden: 100,
            epochs: 100,
            lr: 1e-3,
            batch: 64,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProbeResult {
    pub test_scores: Vec<f32>,
    pub test_labels: Vec<bool>,
    pub auc: f64,
    /// Epoch whose parameters produced the scores (lowest validation loss).
    pub best_epoch: usize,
}

/// Trains `2d → hidden → 1` with BCE and Adam on the train split, keeps the
/// epoch with the lowest validation loss, and scores the test split.
/// Features are standardized with train-split statistics.
pub fn train_probe(
    probe: &ProbeDataset,
    opts: &ProbeOptions,
    rng: &mut Rng,
) -> Result<ProbeResult> {
    if opts.hidden == 0 || opts.batch == 0 {
        return Err(Error::Analysis(
            "probe hidden width and batch must be >= 1".into(),
        ));
    }
    if probe.train.is_empty() || probe.test.is_empty() {
        return Err(Error::Analysis("probe split is empty".into()));
    }
    let x = standardize(&probe.features, &probe.train);
    let width = x.cols();
    let mut params = Mlp2Params::xavier(width, opts.hidden, 1, rng)?;
    let mut state = AdamState::new();
    let adam = AdamConfig::with_lr(opts.lr);
    let eval_mode = ForwardMode::eval(OutputActivation::Identity);

    let subset = |idx: &[usize]| -> (Matrix, Matrix) {
        let xs = x.select_rows(idx);
        let ys = Matrix::from_vec(idx.len(), 1, idx.iter().map(|&i| probe.labels[i]).collect())
            .expect("label column");
        (xs, ys)
    };
    let (xv, yv) = subset(&probe.val);
    let val_loss = |p: &Mlp2Params, rng: &mut Rng| -> Result<f64> {
        if xv.rows() == 0 {
            return Ok(0.0);
        }
        let t = p.forward(Mlp2Input::Dense(&xv), eval_mode, rng)?;
        Ok(bce_with_logits(t.output(), &yv)?.0)
    };

    let mut best = params.clone();
    let mut best_loss = val_loss(&params, rng)?;
    let mut best_epoch = 0;
    let mut order = probe.train.clone();
    for epoch in 1..=opts.epochs {
        rng.shuffle(&mut order);
        for chunk in order.chunks(opts.batch) {
            let (xb, yb) = subset(chunk);
            let t = params.forward(Mlp2Input::Dense(&xb), eval_mode, rng)?;
            let (_, g) = bce_with_logits(t.output(), &yb)?;
            let mut grads = params.zeros_like();
            params.backward_into(&t, &g, &mut grads, false)?;
            adam_update(&mut params, &grads, "probe", &mut state, &adam)
                .map_err(|e| Error::Analysis(format!("probe training diverged: {e}")))?;
        }
        let l = val_loss(&params, rng)?;
        if !l.is_finite() {
            return Err(Error::Analysis(
                "probe validation loss is not finite".into(),
            ));
        }
        if l < best_loss {
            best_loss = l;
            best = params.clone();
            best_epoch = epoch;
        }
    }

    let (xt, _) = subset(&probe.test);
    let t = best.forward(Mlp2Input::Dense(&xt), eval_mode, rng)?;
    let test_scores: Vec<f32> = t.output().data().to_vec();
    let test_labels: Vec<bool> = probe.test.iter().map(|&i| probe.labels[i] > 0.5).collect();
    let scores64: Vec<f64> = test_scores.iter().map(|&s| s as f64).collect();
    let auc = auc(&scores64, &test_labels)?;
    Ok(ProbeResult {
        test_scores,
        test_labels,
        auc,
        best_epoch,
    })
}

/// Probe AUC over `runs` independent rebuilds (fresh negatives, split and
/// initialization each time).
pub fn probe_auc_runs(
    z_a: &Matrix,
    z_b: &Matrix,
    runs: usize,
    opts: &ProbeOptions,
    seed: u64,
) -> Result<Vec<f64>> {
    let mut master = Rng::keyed(seed, "probe");
    (0..runs)
        .map(|_| {
            let mut rng = master.split();
            let probe = build_probe(z_a, z_b, &mut rng)?;
            Ok(train_probe(&probe, opts, &mut rng)?.auc)
        })
        .collect()
}

fn standardize(x: &Matrix, rows: &[usize]) -> Matrix {
    let cols = x.cols();
    let n = rows.len().max(1) as f64;
    let mut mean = vec![0.0f64; cols];
    for &r in rows {
        for (m, &v) in mean.iter_mut().zip(x.row(r)) {
            *m += v as f64;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0f64; cols];
    for &r in rows {
        for ((s, &v), m) in var.iter_mut().zip(x.row(r)).zip(&mean) {
            *s += (v as f64 - m).powi(2);
        }
    }
    let inv_sd: Vec<f64> = var.iter().map(|s| 1.0 / (s / n).sqrt().max(1e-8)).collect();
    let mut out = x.clone();
    for r in 0..out.rows() {
        for ((v, m), s) in out.row_mut(r).iter_mut().zip(&mean).zip(&inv_sd) {
            *v = ((*v as f64 - m) * s) as f32;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn noise(n: usize, d: usize, rng: &mut Rng) -> Matrix {
        Matrix::from_vec(n, d, (0..n * d).map(|_| rng.normal() as f32).collect()).unwrap()
    }

    #[test]
    fn counts_and_invariants() {
        let mut rng = Rng::seed_from(1);
        let z = noise(5, 3, &mut rng);
        let p = build_probe(&z, &z, &mut rng).unwrap();
        assert_eq!(p.len(), 10);
        assert_eq!(p.labels.iter().filter(|&&l| l == 1.0).count(), 5);
        for (k, &(i, j)) in p.pairs.iter().enumerate() {
            assert_eq!(p.labels[k] == 1.0, i == j);
        }
        assert_eq!((p.train.len(), p.val.len(), p.test.len()), (6, 2, 2));
        assert_eq!(p.features.cols(), 6);
    }

    #[test]
    fn splits_are_disjoint_by_anchor_user() {
        let mut rng = Rng::seed_from(2);
        let z = noise(40, 2, &mut rng);
        let p = build_probe(&z, &z, &mut rng).unwrap();
        let anchors = |idx: &[usize]| -> std::collections::BTreeSet<usize> {
            idx.iter().map(|&k| p.pairs[k].0).collect()
        };
        let (tr, va, te) = (anchors(&p.train), anchors(&p.val), anchors(&p.test));
        assert!(tr.is_disjoint(&va) && tr.is_disjoint(&te) && va.is_disjoint(&te));
        assert_eq!(tr.len() + va.len() + te.len(), 40);
    }

    #[test]
    fn seeded_determinism() {
        let mut rng = Rng::seed_from(3);
        let z = noise(20, 2, &mut rng);
        let a = build_probe(&z, &z, &mut Rng::seed_from(9)).unwrap();
        let b = build_probe(&z, &z, &mut Rng::seed_from(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn too_few_users() {
        let z = Matrix::zeros(4, 2);
        assert!(matches!(
            build_probe(&z, &z, &mut Rng::seed_from(0)),
            Err(Error::TooFewUsers { needed: 5, got: 4 })
        ));
    }
}
