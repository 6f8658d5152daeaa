//! The training loop: per batch, a joint-reconstruction step on encoders,
//! decoders and transformation, then (unless ablated) discriminator steps
//! and a generator step on the encoders.

pub mod config;
pub mod loss;

pub use config::{lambda_for_pair, Ablation, TrainConfig};
pub use loss::{
    jrl_loss, prl_discriminator_loss, prl_generator_loss, DiscBreakdown, GenBreakdown,
    JrlBreakdown, JrlOptions, JrlOutput,
};

use std::fmt::Write as _;
use std::time::Instant;

use crate::dataio::{Domain, PairedDataset, Phase};
use crate::error::{Error, Result};
use crate::eval::{evaluate, Metric};
use crate::model::{sample_prior, EtlModel, Mode, PriorSpec};
use crate::numerics::{adam_update, AdamConfig, AdamState, Parameters, Rng, SparseRow};

/// Adam states, one per network, plus a reusable gradient buffer. The
/// encoders' states are shared by the reconstruction and generator updates,
/// so the second-moment estimate sees both and `η` keeps its weight relative
/// to the reconstruction loss.
#[derive(Clone, Debug)]
pub struct Optimizers {
    cfg: AdamConfig,
    /// enc_a, enc_b, dec_a, dec_b, transform
    jrl: [AdamState; 5],
    disc: [AdamState; 2],
    grads: EtlModel,
}

impl Optimizers {
    pub fn new(model: &EtlModel, lr: f64) -> Self {
        Optimizers {
            cfg: AdamConfig::with_lr(lr),
            jrl: Default::default(),
            disc: Default::default(),
            grads: model.zeros_like(),
        }
    }

    fn zero_grads(&mut self) {
        self.grads.visit_mut("", &mut |_, t| t.fill(0.0));
    }

    fn step_jrl(&mut self, model: &mut EtlModel, update_transform: bool) -> Result<()> {
        let [ea, eb, da, db, tr] = &mut self.jrl;
        adam_update(
            &mut model.enc[0],
            &self.grads.enc[0],
            "enc_a",
            ea,
            &self.cfg,
        )?;
        adam_update(
            &mut model.enc[1],
            &self.grads.enc[1],
            "enc_b",
            eb,
            &self.cfg,
        )?;
        adam_update(
            &mut model.dec[0],
            &self.grads.dec[0],
            "dec_a",
            da,
            &self.cfg,
        )?;
        adam_update(
            &mut model.dec[1],
            &self.grads.dec[1],
            "dec_b",
            db,
            &self.cfg,
        )?;
        if update_transform {
            adam_update(
                &mut model.transform,
                &self.grads.transform,
                "transform",
                tr,
                &self.cfg,
            )?;
        }
        Ok(())
    }

    fn step_disc(&mut self, model: &mut EtlModel) -> Result<()> {
        let [a, b] = &mut self.disc;
        adam_update(
            &mut model.disc[0],
            &self.grads.disc[0],
            "disc_a",
            a,
            &self.cfg,
        )?;
        adam_update(
            &mut model.disc[1],
            &self.grads.disc[1],
            "disc_b",
            b,
            &self.cfg,
        )
    }

    fn step_gen(&mut self, model: &mut EtlModel) -> Result<()> {
        let [a, b, ..] = &mut self.jrl;
        adam_update(&mut model.enc[0], &self.grads.enc[0], "enc_a", a, &self.cfg)?;
        adam_update(&mut model.enc[1], &self.grads.enc[1], "enc_b", b, &self.cfg)
    }
}

/// Batch means of the loss components over one epoch.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub batches: usize,
    pub jrl: f64,
    /// Unweighted transformation penalty.
    pub penalty: f64,
    pub disc: f64,
    /// Unweighted generator loss.
    pub gen: f64,
    /// `jrl + η·gen`.
    pub total: f64,
    pub ms: f64,
}

/// Runs one epoch over all users in a freshly shuffled order.
pub fn train_epoch(
    ds: &PairedDataset,
    model: &mut EtlModel,
    opt: &mut Optimizers,
    cfg: &TrainConfig,
    epoch: usize,
    rng: &mut Rng,
) -> Result<EpochStats> {
    let start = Instant::now();
    let mode = Mode::Train {
        dropout: cfg.dropout,
    };
    let jrl_opts = JrlOptions {
        lambda: cfg.lambda,
        cross: cfg.ablation.uses_cross_terms(),
        penalty_norm: cfg.penalty_norm,
        mode,
    };
    let prior_spec = PriorSpec {
        kind: cfg.prior,
        dim: cfg.latent,
    };

    let mut order: Vec<usize> = (0..ds.n_users()).collect();
    rng.shuffle(&mut order);
    let [da, db] = &ds.domains;

    let mut sums = [0.0f64; 4];
    let mut batches = 0;
    for chunk in order.chunks(cfg.batch) {
        let rows_a: Vec<&SparseRow> = chunk.iter().map(|&u| da.train.row(u)).collect();
        let rows_b: Vec<&SparseRow> = chunk.iter().map(|&u| db.train.row(u)).collect();

        opt.zero_grads();
        let out = jrl_loss(model, [&rows_a, &rows_b], &jrl_opts, rng, &mut opt.grads)?;
        opt.step_jrl(model, !cfg.freeze_transform)?;
        batches += 1;
        if cfg.reorthogonalize_every > 0
            && batches % cfg.reorthogonalize_every == 0
            && !cfg.freeze_transform
        {
            model.transform.reorthogonalize();
        }
        sums[0] += out.breakdown.total;
        sums[1] += out.breakdown.penalty.unwrap_or(0.0);

        if cfg.ablation.uses_prior() {
            let traces = [
                model.encode_trace(&rows_a, Domain::A, mode, rng)?,
                model.encode_trace(&rows_b, Domain::B, mode, rng)?,
            ];
            let mut disc_loss = 0.0;
            for _ in 0..cfg.disc_steps {
                let pa = sample_prior(prior_spec, chunk.len(), rng)?;
                let pb = sample_prior(prior_spec, chunk.len(), rng)?;
                opt.zero_grads();
                let z = [traces[0].output(), traces[1].output()];
                disc_loss +=
                    prl_discriminator_loss(model, z, [&pa, &pb], mode, rng, &mut opt.grads)?.total;
                opt.step_disc(model)?;
            }
            sums[2] += disc_loss / cfg.disc_steps as f64;

            opt.zero_grads();
            let gen = prl_generator_loss(
                model,
                [&traces[0], &traces[1]],
                cfg.eta,
                mode,
                rng,
                &mut opt.grads,
            )?;
            if cfg.eta > 0.0 {
                opt.step_gen(model)?;
            }
            sums[3] += gen.raw;
        }
    }
    let n = batches.max(1) as f64;
    let (jrl, penalty, disc, gen) = (sums[0] / n, sums[1] / n, sums[2] / n, sums[3] / n);
    Ok(EpochStats {
        epoch,
        batches,
        jrl,
        penalty,
        disc,
        gen,
        total: jrl + cfg.eta as f64 * gen,
        ms: start.elapsed().as_secs_f64() * 1e3,
    })
}

/// One training-log entry.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochRecord {
    pub stats: EpochStats,
    /// Validation NDCG@10 per domain, when this epoch was validated.
    pub val_ndcg10: Option<[f64; 2]>,
}

impl EpochRecord {
    pub const CSV_HEADER: &'static str = "epoch,jrl,penalty,disc,gen,val_ndcg10_a,val_ndcg10_b,ms";

    /// One CSV line. Timing is written only when `with_timing` is set so
    /// that identical runs produce identical logs.
    pub fn csv_line(&self, with_timing: bool) -> String {
        let s = &self.stats;
        let mut line = format!(
            "{},{:.6},{:.6},{:.6},{:.6}",
            s.epoch, s.jrl, s.penalty, s.disc, s.gen
        );
        match self.val_ndcg10 {
            Some([a, b]) => {
                let _ = write!(line, ",{a:.6},{b:.6}");
            }
            None => line.push_str(",,"),
        }
        let ms = if with_timing { s.ms.round() as u64 } else { 0 };
        let _ = write!(line, ",{ms}");
        line
    }
}

#[derive(Clone, Debug)]
pub struct FitResult {
    /// Parameters at the best validation epoch (epoch 0 is the initialization).
    pub best: EtlModel,
    pub best_epoch: usize,
    /// Mean validation NDCG@10 over both domains at `best_epoch`.
    pub best_val: f64,
    /// Parameters after the last epoch.
    pub last: EtlModel,
    pub log: Vec<EpochRecord>,
}

impl FitResult {
    pub fn log_csv(&self, with_timing: bool) -> String {
        let mut s = format!("{}\n", EpochRecord::CSV_HEADER);
        for r in &self.log {
            s.push_str(&r.csv_line(with_timing));
            s.push('\n');
        }
        s
    }
}

fn validation_ndcg(model: &EtlModel, ds: &PairedDataset) -> Result<[f64; 2]> {
    let r = evaluate(model, ds, Phase::Val, &[10])?;
    let get = |d| {
        r.get(d, Metric::Ndcg, 10)
            .ok_or_else(|| Error::Evaluation("missing ndcg@10".into()))
    };
    Ok([get(Domain::A)?, get(Domain::B)?])
}

/// Trains from a seeded initialization and keeps the checkpoint with the
/// best mean validation NDCG@10. `on_epoch` sees every log record as it is
/// produced.
pub fn fit_with(
    ds: &PairedDataset,
    cfg: &TrainConfig,
    on_epoch: &mut dyn FnMut(&EpochRecord),
) -> Result<FitResult> {
    cfg.validate()?;
    let items = [
        ds.domain(Domain::A).n_items(),
        ds.domain(Domain::B).n_items(),
    ];
    let mut model = EtlModel::new(cfg.model_spec(items), &mut Rng::keyed(cfg.seed, "init"))?;
    let mut rng = Rng::keyed(cfg.seed, "train");
    let mut opt = Optimizers::new(&model, cfg.lr);

    let v0 = validation_ndcg(&model, ds)?;
    let mut best = model.clone();
    let mut best_epoch = 0;
    let mut best_val = (v0[0] + v0[1]) / 2.0;
    let mut log = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        let stats = train_epoch(ds, &mut model, &mut opt, cfg, epoch, &mut rng)?;
        let validate = epoch % cfg.eval_interval == 0 || epoch == cfg.epochs;
        let val_ndcg10 = if validate {
            Some(validation_ndcg(&model, ds)?)
        } else {
            None
        };
        if let Some([a, b]) = val_ndcg10 {
            let v = (a + b) / 2.0;
            if v > best_val {
                best_val = v;
                best_epoch = epoch;
                best = model.clone();
            }
        }
        let rec = EpochRecord { stats, val_ndcg10 };
        on_epoch(&rec);
        log.push(rec);
    }
    Ok(FitResult {
        best,
        best_epoch,
        best_val,
        last: model,
        log,
    })
}

pub fn fit(ds: &PairedDataset, cfg: &TrainConfig) -> Result<FitResult> {
    fit_with(ds, cfg, &mut |_| {})
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::{loo_split, InteractionMatrix, SplitOptions};

    /// Two blocks of users with disjoint tastes, mirrored across domains.
    fn toy(users: usize) -> PairedDataset {
        let n_items = 120;
        let ut: Vec<String> = (0..users).map(|u| format!("u{u:03}")).collect();
        let it: Vec<String> = (0..n_items).map(|i| format!("i{i:03}")).collect();
        let mut rng = Rng::seed_from(5);
        let rows: Vec<SparseRow> = (0..users)
            .map(|u| {
                let base = if u % 2 == 0 { 0 } else { 60 };
                let mut idx: Vec<u32> = (0..12).map(|_| (base + rng.below(20)) as u32).collect();
                idx.sort_unstable();
                idx.dedup();
                SparseRow::binary(n_items, idx).unwrap()
            })
            .collect();
        let m = InteractionMatrix::new(ut, it, rows).unwrap();
        loo_split(
            &m,
            &m,
            &SplitOptions {
                n_negatives: 20,
                seed: 1,
                ..SplitOptions::default()
            },
        )
        .unwrap()
    }

    fn small_cfg() -> TrainConfig {
        TrainConfig {
            latent: 4,
            hidden: 16,
            disc_hidden: 8,
            batch: 16,
            epochs: 3,
            dropout: 0.2,
            lr: 5e-3,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn zero_epochs_returns_initialization() {
        let ds = toy(20);
        let cfg = TrainConfig {
            epochs: 0,
            ..small_cfg()
        };
        let r = fit(&ds, &cfg).unwrap();
        assert_eq!(r.best_epoch, 0);
        assert!(r.log.is_empty());
        let init = EtlModel::new(
            cfg.model_spec([120, 120]),
            &mut Rng::keyed(cfg.seed, "init"),
        )
        .unwrap();
        assert_eq!(r.best, init);
    }

    #[test]
    fn batch_count_is_ceiling() {
        let ds = toy(40);
        let cfg = TrainConfig {
            batch: 16,
            epochs: 1,
            ..small_cfg()
        };
        let r = fit(&ds, &cfg).unwrap();
        assert_eq!(r.log[0].stats.batches, ds.n_users().div_ceil(16));
    }

    #[test]
    fn seeded_runs_are_identical() {
        let ds = toy(30);
        let a = fit(&ds, &small_cfg()).unwrap();
        let b = fit(&ds, &small_cfg()).unwrap();
        assert_eq!(a.log_csv(false), b.log_csv(false));
        assert_eq!(a.best, b.best);
    }

    #[test]
    fn etl_jrl_never_touches_discriminators() {
        let ds = toy(30);
        let cfg = TrainConfig {
            ablation: Ablation::EtlJrl,
            ..small_cfg()
        };
        let r = fit(&ds, &cfg).unwrap();
        let init = EtlModel::new(
            cfg.model_spec([120, 120]),
            &mut Rng::keyed(cfg.seed, "init"),
        )
        .unwrap();
        assert_eq!(r.last.disc, init.disc);
        assert_ne!(r.last.enc, init.enc);
    }

    #[test]
    fn autoencoder_loss_decreases() {
        let ds = toy(40);
        let cfg = TrainConfig {
            eta: 0.0,
            lambda: 0.0,
            epochs: 10,
            dropout: 0.0,
            ..small_cfg()
        };
        let r = fit(&ds, &cfg).unwrap();
        assert!(r.log.last().unwrap().stats.jrl < r.log[0].stats.jrl);
    }

    #[test]
    fn total_is_jrl_plus_weighted_gen() {
        let ds = toy(20);
        let cfg = TrainConfig {
            eta: 0.7,
            epochs: 1,
            ..small_cfg()
        };
        let s = fit(&ds, &cfg).unwrap().log[0].stats;
        assert!((s.total - (s.jrl + 0.7f32 as f64 * s.gen)).abs() < 1e-12);
    }

    #[test]
    fn log_lines_have_eight_fields() {
        let ds = toy(20);
        let cfg = TrainConfig {
            epochs: 2,
            eval_interval: 2,
            ..small_cfg()
        };
        let r = fit(&ds, &cfg).unwrap();
        let csv = r.log_csv(false);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], EpochRecord::CSV_HEADER);
        for l in &lines[1..] {
            assert_eq!(l.split(',').count(), 8);
            assert!(l.ends_with(",0"));
        }
        assert!(
            lines[1].contains(",,,"),
            "epoch 1 is not validated: {}",
            lines[1]
        );
    }
}
