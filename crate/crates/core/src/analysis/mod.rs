//! Diagnostics on trained models: latent-distribution distance (MMD), the
//! pairing probe, and paired t-tests across seeds.

pub mod mmd;
pub mod probe;
pub mod stats;

pub use mmd::{mmd_rbf, DEFAULT_SIGMAS};
pub use probe::{
    build_probe, probe_auc_runs, train_probe, ProbeDataset, ProbeOptions, ProbeResult,
    MIN_PROBE_USERS,
};
pub use stats::{auc, mean_and_se, paired_ttest, TTest};

use serde::{Deserialize, Serialize};

use crate::dataio::{Domain, PairedDataset};
use crate::error::Result;
use crate::model::{Direction, EtlModel};
use crate::numerics::{Matrix, SparseRow};

/// Eval-mode latent codes of every user, per domain.
pub fn encode_all(model: &EtlModel, ds: &PairedDataset) -> Result<[Matrix; 2]> {
    let mut out = Vec::with_capacity(2);
    for d in Domain::BOTH {
        let rows: Vec<&SparseRow> = ds.domain(d).train.rows().iter().collect();
        let mut z = Matrix::zeros(rows.len(), model.latent_dim());
        for (c, chunk) in rows.chunks(512).enumerate() {
            let part = model.encode(chunk, d)?;
            for i in 0..chunk.len() {
                z.row_mut(c * 512 + i).copy_from_slice(part.row(i));
            }
        }
        out.push(z);
    }
    let b = out.pop().unwrap();
    let a = out.pop().unwrap();
    Ok([a, b])
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MmdReport {
    pub sigmas: Vec<f64>,
    /// Between the raw latents of the two domains.
    pub latent: f64,
    /// Between `T_ab(z_a)` and `z_b`.
    pub transformed: f64,
}

/// MMD between the domains' latent sets, before and after mapping `a → b`.
pub fn latent_mmd(
    model: &EtlModel,
    ds: &PairedDataset,
    sigmas: &[f64],
    max_users: usize,
) -> Result<MmdReport> {
    let [za, zb] = encode_all(model, ds)?;
    let keep: Vec<usize> = (0..za.rows().min(max_users.max(1))).collect();
    let (za, zb) = (za.select_rows(&keep), zb.select_rows(&keep));
    let mapped = model.transform(&za, Direction::AtoB)?;
    Ok(MmdReport {
        sigmas: sigmas.to_vec(),
        latent: mmd_rbf(&za, &zb, sigmas)?,
        transformed: mmd_rbf(&mapped, &zb, sigmas)?,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeSummary {
    pub runs: Vec<f64>,
    pub mean: f64,
    pub se: f64,
}

impl ProbeSummary {
    pub fn from_runs(runs: Vec<f64>) -> Self {
        let (mean, se) = mean_and_se(&runs);
        ProbeSummary { runs, mean, se }
    }
}

/// Pairing-probe AUC on a model's latents.
pub fn latent_probe(
    model: &EtlModel,
    ds: &PairedDataset,
    runs: usize,
    opts: &ProbeOptions,
    seed: u64,
) -> Result<ProbeSummary> {
    let [za, zb] = encode_all(model, ds)?;
    Ok(ProbeSummary::from_runs(probe_auc_runs(
        &za, &zb, runs, opts, seed,
    )?))
}
