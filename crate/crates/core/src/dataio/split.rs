//! Leave-one-out splits with fixed negative candidate sets.

use std::fmt;

use crate::dataio::pairing::{InteractionMatrix, MIN_USER_INTERACTIONS};
use crate::error::{Error, Result};
use crate::numerics::{Rng, SparseRow};

/// One of the two paired domains.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Domain {
    A,
    B,
}

impl Domain {
    pub const BOTH: [Domain; 2] = [Domain::A, Domain::B];

    pub fn index(self) -> usize {
        match self {
            Domain::A => 0,
            Domain::B => 1,
        }
    }

    pub fn other(self) -> Domain {
        match self {
            Domain::A => Domain::B,
            Domain::B => Domain::A,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Domain::A => "a",
            Domain::B => "b",
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Phase {
    Val,
    Test,
}

impl Phase {
    pub fn name(self) -> &'static str {
        match self {
            Phase::Val => "val",
            Phase::Test => "test",
        }
    }
}

impl std::str::FromStr for Phase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "val" | "validation" => Ok(Phase::Val),
            "test" => Ok(Phase::Test),
            other => Err(Error::Config(format!("unknown phase `{other}`"))),
        }
    }
}

/// Train rows plus held-out items and candidate negatives for one domain.
#[derive(Clone, Debug, PartialEq)]
pub struct DomainData {
    /// Training interactions; validation and test items are removed.
    pub train: InteractionMatrix,
    pub val_item: Vec<u32>,
    pub test_item: Vec<u32>,
    pub val_negatives: Vec<Vec<u32>>,
    pub test_negatives: Vec<Vec<u32>>,
}

impl DomainData {
    pub fn n_items(&self) -> usize {
        self.train.n_items()
    }

    pub fn target(&self, phase: Phase, user: usize) -> u32 {
        match phase {
            Phase::Val => self.val_item[user],
            Phase::Test => self.test_item[user],
        }
    }

    pub fn negatives(&self, phase: Phase, user: usize) -> &[u32] {
        match phase {
            Phase::Val => &self.val_negatives[user],
            Phase::Test => &self.test_negatives[user],
        }
    }

    /// Train + validation + test interactions.
    pub fn total_interactions(&self) -> usize {
        self.train.nnz() + 2 * self.val_item.len()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DatasetMeta {
    pub seed: u64,
    pub min_count: usize,
    pub n_negatives: usize,
}

/// Two domains over one user ordering, ready for training and evaluation.
#[derive(Clone, Debug, PartialEq)]
pub struct PairedDataset {
    pub users: Vec<String>,
    pub domains: [DomainData; 2],
    pub meta: DatasetMeta,
}

impl PairedDataset {
    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    pub fn domain(&self, d: Domain) -> &DomainData {
        &self.domains[d.index()]
    }

    pub fn train_nnz(&self) -> usize {
        self.domains.iter().map(|d| d.train.nnz()).sum()
    }

    pub fn stats(&self) -> [DomainStats; 2] {
        Domain::BOTH.map(|d| {
            let dd = self.domain(d);
            let interactions = dd.total_interactions();
            DomainStats {
                domain: d,
                users: self.n_users(),
                items: dd.n_items(),
                interactions,
                density: interactions as f64
                    / (self.n_users() as f64 * dd.n_items() as f64).max(1.0),
            }
        })
    }

    /// Keeps a random `ratio` of each user's training interactions (at least
    /// one), leaving validation/test items and negatives untouched.
    /// `ratio == 1.0` returns an identical copy.
    pub fn subsample_train(&self, ratio: f64, rng: &mut Rng) -> Result<PairedDataset> {
        if !(ratio > 0.0 && ratio <= 1.0) {
            return Err(Error::Config(format!("train ratio {ratio} outside (0, 1]")));
        }
        let mut out = self.clone();
        if ratio == 1.0 {
            return Ok(out);
        }
        for d in out.domains.iter_mut() {
            let n_items = d.n_items();
            let rows: Vec<SparseRow> = d
                .train
                .rows()
                .iter()
                .map(|row| {
                    let mut idx = row.indices().to_vec();
                    let keep = ((idx.len() as f64 * ratio).round() as usize)
                        .clamp(1.min(idx.len()), idx.len());
                    rng.shuffle(&mut idx);
                    idx.truncate(keep);
                    idx.sort_unstable();
                    SparseRow::binary(n_items, idx)
                })
                .collect::<Result<_>>()?;
            let (users, items, _) = d.train.clone().into_parts();
            d.train = InteractionMatrix::new(users, items, rows)?;
        }
        Ok(out)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DomainStats {
    pub domain: Domain,
    pub users: usize,
    pub items: usize,
    pub interactions: usize,
    pub density: f64,
}

impl fmt::Display for DomainStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "domain={} users={} items={} interactions={} density={:.4}%",
            self.domain,
            self.users,
            self.items,
            self.interactions,
            self.density * 100.0
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SplitOptions {
    pub n_negatives: usize,
    /// Reuse the validation negatives for the test item.
    pub shared_negatives: bool,
    pub seed: u64,
    pub min_count: usize,
}

impl Default for SplitOptions {
    fn default() -> Self {
        SplitOptions {
            n_negatives: 99,
            shared_negatives: false,
            seed: 0,
            min_count: 5,
        }
    }
}

/// Reserves one validation and one test item per user per domain and draws
/// fixed negative sets from items the user never interacted with.
///
/// Users are processed in row order, each with its own child stream split
/// from a master stream seeded by `opts.seed`. Users left without a training
/// item in either domain are dropped from both.
pub fn loo_split(
    a: &InteractionMatrix,
    b: &InteractionMatrix,
    opts: &SplitOptions,
) -> Result<PairedDataset> {
    if a.user_tokens() != b.user_tokens() {
        return Err(Error::Split(
            "domains are not paired over one user ordering".into(),
        ));
    }
    for m in [a, b] {
        if m.n_items() < opts.n_negatives + MIN_USER_INTERACTIONS {
            return Err(Error::Split(format!(
                "{} items cannot supply {} negatives",
                m.n_items(),
                opts.n_negatives
            )));
        }
    }
    let mut master = Rng::keyed(opts.seed, "loo-split");
    let mut users = Vec::new();
    let mut parts: [Vec<UserSplit>; 2] = [Vec::new(), Vec::new()];
    for u in 0..a.n_users() {
        let mut rng = master.split();
        let rows = [a.row(u), b.row(u)];
        if rows.iter().any(|r| r.nnz() < MIN_USER_INTERACTIONS) {
            log::info!(
                "dropping user `{}`: too few interactions to split",
                a.user_tokens()[u]
            );
            continue;
        }
        let mut per_domain = Vec::with_capacity(2);
        for row in rows {
            match split_user(row, opts, &mut rng)? {
                Some(s) => per_domain.push(s),
                None => break,
            }
        }
        if per_domain.len() < 2 {
            log::info!(
                "dropping user `{}`: too few candidate negatives",
                a.user_tokens()[u]
            );
            continue;
        }
        users.push(a.user_tokens()[u].clone());
        let second = per_domain.pop().unwrap();
        let first = per_domain.pop().unwrap();
        parts[0].push(first);
        parts[1].push(second);
    }
    if users.is_empty() {
        return Err(Error::Split("no user survived the split".into()));
    }
    let [pa, pb] = parts;
    let domains = [assemble(&users, a, pa)?, assemble(&users, b, pb)?];
    Ok(PairedDataset {
        users,
        domains,
        meta: DatasetMeta {
            seed: opts.seed,
            min_count: opts.min_count,
            n_negatives: opts.n_negatives,
        },
    })
}

struct UserSplit {
    train: Vec<u32>,
    val: u32,
    test: u32,
    val_negatives: Vec<u32>,
    test_negatives: Vec<u32>,
}

fn split_user(row: &SparseRow, opts: &SplitOptions, rng: &mut Rng) -> Result<Option<UserSplit>> {
    let items = row.indices();
    let n = items.len();
    let vi = rng.below(n);
    let mut ti = rng.below(n - 1);
    if ti >= vi {
        ti += 1;
    }
    let pool = row.dim() - n;
    if pool < opts.n_negatives {
        return Ok(None);
    }
    let val_negatives = sample_negatives(row, opts.n_negatives, rng);
    let test_negatives = if opts.shared_negatives {
        val_negatives.clone()
    } else {
        sample_negatives(row, opts.n_negatives, rng)
    };
    let train = items
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != vi && i != ti)
        .map(|(_, &j)| j)
        .collect();
    Ok(Some(UserSplit {
        train,
        val: items[vi],
        test: items[ti],
        val_negatives,
        test_negatives,
    }))
}

/// Draws `k` distinct items absent from `row`, returned sorted.
fn sample_negatives(row: &SparseRow, k: usize, rng: &mut Rng) -> Vec<u32> {
    let dim = row.dim();
    let pool = dim - row.nnz();
    let mut picked: Vec<u32> = Vec::with_capacity(k);
    if pool >= 2 * k {
        while picked.len() < k {
            let j = rng.below(dim) as u32;
            if !row.contains(j) && !picked.contains(&j) {
                picked.push(j);
            }
        }
    } else {
        let mut candidates: Vec<u32> = (0..dim as u32).filter(|j| !row.contains(*j)).collect();
        for i in 0..k {
            let j = i + rng.below(candidates.len() - i);
            candidates.swap(i, j);
        }
        candidates.truncate(k);
        picked = candidates;
    }
    picked.sort_unstable();
    picked
}

fn assemble(
    users: &[String],
    full: &InteractionMatrix,
    parts: Vec<UserSplit>,
) -> Result<DomainData> {
    let n_items = full.n_items();
    let mut rows = Vec::with_capacity(parts.len());
    let mut val_item = Vec::with_capacity(parts.len());
    let mut test_item = Vec::with_capacity(parts.len());
    let mut val_negatives = Vec::with_capacity(parts.len());
    let mut test_negatives = Vec::with_capacity(parts.len());
    for p in parts {
        rows.push(SparseRow::binary(n_items, p.train)?);
        val_item.push(p.val);
        test_item.push(p.test);
        val_negatives.push(p.val_negatives);
        test_negatives.push(p.test_negatives);
    }
    Ok(DomainData {
        train: InteractionMatrix::new(users.to_vec(), full.item_tokens().to_vec(), rows)?,
        val_item,
        test_item,
        val_negatives,
        test_negatives,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix(users: usize, items: usize, per_user: &[Vec<u32>]) -> InteractionMatrix {
        let ut: Vec<String> = (0..users).map(|u| format!("u{u}")).collect();
        let it: Vec<String> = (0..items).map(|i| format!("i{i:03}")).collect();
        let rows = per_user
            .iter()
            .map(|idx| SparseRow::binary(items, idx.clone()).unwrap())
            .collect();
        InteractionMatrix::new(ut, it, rows).unwrap()
    }

    fn opts(n_negatives: usize) -> SplitOptions {
        SplitOptions {
            n_negatives,
            seed: 17,
            ..SplitOptions::default()
        }
    }

    #[test]
    fn three_items_partition() {
        let a = matrix(1, 120, &[vec![1, 2, 3]]);
        let ds = loo_split(&a, &a, &opts(99)).unwrap();
        let d = ds.domain(Domain::A);
        let mut all = vec![d.val_item[0], d.test_item[0]];
        all.extend_from_slice(d.train.row(0).indices());
        all.sort_unstable();
        assert_eq!(all, vec![1, 2, 3]);
        assert_ne!(d.val_item[0], d.test_item[0]);
        assert_eq!(d.train.row(0).nnz(), 1);
    }

    #[test]
    fn negatives_avoid_interactions() {
        let rows: Vec<Vec<u32>> = (0..20).map(|u| (u..u + 8).collect()).collect();
        let a = matrix(20, 130, &rows);
        let ds = loo_split(&a, &a, &opts(99)).unwrap();
        for d in &ds.domains {
            for (u, full) in rows.iter().enumerate() {
                for negs in [&d.val_negatives[u], &d.test_negatives[u]] {
                    assert_eq!(negs.len(), 99);
                    assert!(negs.iter().all(|j| !full.contains(j)));
                    assert!(negs.windows(2).all(|w| w[0] < w[1]));
                }
            }
        }
    }

    #[test]
    fn seeded_determinism() {
        let rows: Vec<Vec<u32>> = (0..10).map(|u| (u..u + 5).collect()).collect();
        let a = matrix(10, 200, &rows);
        let x = loo_split(&a, &a, &opts(99)).unwrap();
        let y = loo_split(&a, &a, &opts(99)).unwrap();
        assert_eq!(x, y);
        let z = loo_split(
            &a,
            &a,
            &SplitOptions {
                seed: 18,
                ..opts(99)
            },
        )
        .unwrap();
        assert_ne!(x, z);
    }

    #[test]
    fn too_small_catalog_is_a_split_error() {
        let a = matrix(1, 50, &[vec![1, 2, 3]]);
        assert!(matches!(loo_split(&a, &a, &opts(99)), Err(Error::Split(_))));
    }

    #[test]
    fn dense_user_uses_exhaustive_sampling() {
        // 150 items, 45 interacted: pool of 105 < 2·99 forces the shuffle path.
        let a = matrix(1, 150, &[(0..45).collect()]);
        let ds = loo_split(&a, &a, &opts(99)).unwrap();
        let negs = &ds.domain(Domain::A).val_negatives[0];
        assert_eq!(negs.len(), 99);
        assert!(negs.iter().all(|&j| j >= 45));
    }

    #[test]
    fn shared_negatives_option() {
        let a = matrix(1, 200, &[vec![1, 2, 3, 4]]);
        let ds = loo_split(
            &a,
            &a,
            &SplitOptions {
                shared_negatives: true,
                ..opts(99)
            },
        )
        .unwrap();
        let d = ds.domain(Domain::B);
        assert_eq!(d.val_negatives, d.test_negatives);
    }

    #[test]
    fn subsample_ratio_one_is_identity() {
        let rows: Vec<Vec<u32>> = (0..10).map(|u| (u..u + 9).collect()).collect();
        let a = matrix(10, 200, &rows);
        let ds = loo_split(&a, &a, &opts(99)).unwrap();
        let mut rng = Rng::seed_from(1);
        assert_eq!(ds.subsample_train(1.0, &mut rng).unwrap(), ds);
        let half = ds.subsample_train(0.5, &mut rng).unwrap();
        for (full, sub) in ds.domains.iter().zip(&half.domains) {
            assert_eq!(full.val_item, sub.val_item);
            assert_eq!(full.test_negatives, sub.test_negatives);
            for u in 0..ds.n_users() {
                let f = full.train.row(u);
                let s = sub.train.row(u);
                assert!(s.nnz() >= 1 && s.nnz() < f.nnz());
                assert!(s.indices().iter().all(|j| f.contains(*j)));
            }
        }
        assert!(ds.subsample_train(0.0, &mut rng).is_err());
    }
}
