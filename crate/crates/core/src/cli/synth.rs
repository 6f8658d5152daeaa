//! Synthetic paired domains with a controllable shared component.
//!
//! Each user has a shared factor `s` and one specific factor per domain. The
//! domain-a profile is `[s ‖ spec_a]`, the domain-b profile `[s·R ‖ spec_b]`
//! with `R` a random rotation, so `shared_dim = 0` gives independent domains
//! and `specific_dim = 0` gives fully shared (rotated) preferences.
//! Interactions are Bernoulli draws from `σ(signal·⟨u, v⟩/√k + bias)`, where
//! the bias is solved per user and domain so every user's expected number of
//! interactions is `sparsity × items`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::dataio::{
    loo_split, save_dataset, InteractionMatrix, PairedDataset, SplitOptions, MIN_USER_INTERACTIONS,
};
use crate::error::{Error, Result};
use crate::model::orthonormalize;
use crate::numerics::{Matrix, Rng, SparseRow};

/// Generation attempts before giving up on an infeasible configuration.
pub const MAX_SYNTH_ATTEMPTS: usize = 5;
/// Fraction of users that must survive the leave-one-out split.
pub const MIN_KEPT_FRACTION: f64 = 0.9;

#[derive(Clone, Debug, PartialEq)]
pub struct SynthOptions {
    pub n_users: usize,
    pub n_items: [usize; 2],
    pub shared_dim: usize,
    pub specific_dim: usize,
    /// Expected fraction of user–item pairs that are interactions.
    pub sparsity: f64,
    /// Scale of the inner-product logits.
    pub signal: f64,
    pub seed: u64,
    pub n_negatives: usize,
}

impl Default for SynthOptions {
    fn default() -> Self {
        SynthOptions {
            n_users: 2000,
            n_items: [500, 500],
            shared_dim: 8,
            specific_dim: 4,
            sparsity: 0.02,
            signal: 3.0,
            seed: 0,
            n_negatives: 99,
        }
    }
}

impl SynthOptions {
    pub fn validate(&self) -> Result<()> {
        if self.shared_dim + self.specific_dim == 0 {
            return Err(Error::Config(
                "shared_dim + specific_dim must be >= 1".into(),
            ));
        }
        if self.n_users == 0 {
            return Err(Error::Config("n_users must be >= 1".into()));
        }
        if !(self.sparsity > 0.0 && self.sparsity < 1.0) {
            return Err(Error::Config(format!(
                "sparsity {} outside (0, 1)",
                self.sparsity
            )));
        }
        if !(self.signal.is_finite() && self.signal >= 0.0) {
            return Err(Error::Config(format!(
                "signal {} must be finite and >= 0",
                self.signal
            )));
        }
        for &n in &self.n_items {
            if n < self.n_negatives + MIN_USER_INTERACTIONS {
                return Err(Error::Config(format!(
                    "{n} items cannot supply {} negatives",
                    self.n_negatives
                )));
            }
        }
        Ok(())
    }
}

/// Generating factors, indexed by original user id.
#[derive(Clone, Debug, PartialEq)]
pub struct SynthTruth {
    pub users: [Matrix; 2],
    pub items: [Matrix; 2],
    pub rotation: Matrix,
    /// Per domain, per original user.
    pub bias: [Vec<f64>; 2],
    /// Original ids of the users present in the dataset, in dataset order.
    pub kept: Vec<usize>,
    /// Attempt (0-based) that produced the dataset.
    pub attempt: usize,
}

#[derive(Clone, Debug)]
pub struct SynthData {
    pub dataset: PairedDataset,
    pub truth: SynthTruth,
}

pub fn synthesize(opts: &SynthOptions) -> Result<SynthData> {
    opts.validate()?;
    let mut last = String::new();
    for attempt in 0..MAX_SYNTH_ATTEMPTS {
        let mut rng = Rng::keyed(opts.seed, &format!("synth-{attempt}"));
        let (rows, truth) = draw(opts, &mut rng);
        let kept: Vec<usize> = (0..opts.n_users)
            .filter(|&u| rows.iter().all(|r| r[u].nnz() >= MIN_USER_INTERACTIONS))
            .collect();
        let frac = kept.len() as f64 / opts.n_users as f64;
        if frac < MIN_KEPT_FRACTION {
            last = format!(
                "only {:.1}% of users have enough interactions",
                frac * 100.0
            );
            log::warn!("synth attempt {attempt}: {last}; retrying");
            continue;
        }
        let users: Vec<String> = kept.iter().map(|u| format!("u{u:06}")).collect();
        let mut mats = Vec::with_capacity(2);
        for (d, prefix) in ["a", "b"].into_iter().enumerate() {
            let items = (0..opts.n_items[d])
                .map(|i| format!("{prefix}{i:05}"))
                .collect();
            let r = kept.iter().map(|&u| rows[d][u].clone()).collect();
            mats.push(InteractionMatrix::new(users.clone(), items, r)?);
        }
        let split = SplitOptions {
            n_negatives: opts.n_negatives,
            shared_negatives: false,
            seed: opts.seed,
            min_count: 0,
        };
        let dataset = loo_split(&mats[0], &mats[1], &split)?;
        let kept = dataset
            .users
            .iter()
            .map(|t| t[1..].parse().expect("generated token"))
            .collect();
        return Ok(SynthData {
            dataset,
            truth: SynthTruth {
                kept,
                attempt,
                ..truth
            },
        });
    }
    Err(Error::Split(format!(
        "synthetic data infeasible after {MAX_SYNTH_ATTEMPTS} attempts: {last}"
    )))
}

fn gaussian(rows: usize, cols: usize, rng: &mut Rng) -> Matrix {
    Matrix::from_vec(
        rows,
        cols,
        (0..rows * cols).map(|_| rng.normal() as f32).collect(),
    )
    .expect("shape")
}

fn draw(opts: &SynthOptions, rng: &mut Rng) -> ([Vec<SparseRow>; 2], SynthTruth) {
    let (s, p) = (opts.shared_dim, opts.specific_dim);
    let k = s + p;
    let mut rotation = gaussian(s, s, rng);
    if s > 0 {
        orthonormalize(&mut rotation);
    }
    let shared = gaussian(opts.n_users, s, rng);
    let rotated = shared.matmul(&rotation).expect("shape");
    let specific = [
        gaussian(opts.n_users, p, rng),
        gaussian(opts.n_users, p, rng),
    ];
    let users = [
        shared.hconcat(&specific[0]).expect("shape"),
        rotated.hconcat(&specific[1]).expect("shape"),
    ];
    let items = [
        gaussian(opts.n_items[0], k, rng),
        gaussian(opts.n_items[1], k, rng),
    ];

    let scale = opts.signal / (k as f64).sqrt();
    let mut rows: [Vec<SparseRow>; 2] = [Vec::new(), Vec::new()];
    let mut bias = [Vec::new(), Vec::new()];
    for d in 0..2 {
        let logits: Vec<f64> = users[d]
            .matmul_t(&items[d])
            .expect("shape")
            .data()
            .iter()
            .map(|&x| x as f64 * scale)
            .collect();
        let n_items = opts.n_items[d];
        bias[d] = logits
            .chunks(n_items)
            .map(|row| solve_bias(row, opts.sparsity))
            .collect();
        rows[d] = logits
            .chunks(n_items)
            .zip(&bias[d])
            .map(|(row, &b)| {
                let idx: Vec<u32> = row
                    .iter()
                    .enumerate()
                    .filter(|&(_, &l)| rng.uniform_f64() < sigmoid(l + b))
                    .map(|(i, _)| i as u32)
                    .collect();
                SparseRow::binary(n_items, idx).expect("sorted indices")
            })
            .collect();
    }
    let truth = SynthTruth {
        users,
        items,
        rotation,
        bias,
        kept: Vec::new(),
        attempt: 0,
    };
    (rows, truth)
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Bias `b` with `mean σ(l + b) = target`, by bisection.
fn solve_bias(logits: &[f64], target: f64) -> f64 {
    let mean = |b: f64| logits.iter().map(|&l| sigmoid(l + b)).sum::<f64>() / logits.len() as f64;
    let (mut lo, mut hi) = (-60.0, 60.0);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if mean(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-10 {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Writes the dataset plus `truth/` with the generating factors as TSV.
pub fn save_synth(data: &SynthData, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    save_dataset(&data.dataset, dir)?;
    let truth = dir.join("truth");
    fs::create_dir_all(&truth).map_err(|e| Error::io(&truth, e))?;
    let t = &data.truth;
    let files = [
        ("users_a.tsv", &t.users[0]),
        ("users_b.tsv", &t.users[1]),
        ("items_a.tsv", &t.items[0]),
        ("items_b.tsv", &t.items[1]),
        ("rotation.tsv", &t.rotation),
    ];
    for (name, m) in files {
        let path = truth.join(name);
        fs::write(&path, matrix_tsv(m)).map_err(|e| Error::io(&path, e))?;
    }
    let mut info = format!("attempt\t{}\n", t.attempt);
    for (name, xs) in [("bias_a", &t.bias[0]), ("bias_b", &t.bias[1])] {
        info.push_str(name);
        for b in xs.iter() {
            let _ = write!(info, "\t{b}");
        }
        info.push('\n');
    }
    info.push_str("kept");
    for u in &t.kept {
        let _ = write!(info, "\t{u}");
    }
    info.push('\n');
    let path = truth.join("info.tsv");
    fs::write(&path, info).map_err(|e| Error::io(&path, e))
}

fn matrix_tsv(m: &Matrix) -> String {
    let mut s = String::new();
    for r in 0..m.rows() {
        let line: Vec<String> = m.row(r).iter().map(|v| v.to_string()).collect();
        s.push_str(&line.join("\t"));
        s.push('\n');
    }
    s
}
