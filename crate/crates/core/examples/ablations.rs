//! Full ETL against its two ablations on the same data and seed.
//!
//! `etl-jrl` drops the adversarial prior, `aae++` drops the cross-domain
//! reconstructions and the transformation penalty.

use etl::cli::{synthesize, SynthOptions};
use etl::dataio::Phase;
use etl::eval::{evaluate, Metric};
use etl::training::{fit, Ablation, TrainConfig};

fn main() -> etl::Result<()> {
    let data = synthesize(&SynthOptions {
        n_users: 800,
        n_items: [250, 250],
        sparsity: 0.03,
        seed: 3,
        ..SynthOptions::default()
    })?;
    for ablation in [Ablation::FullEtl, Ablation::EtlJrl, Ablation::AaePlusPlus] {
        let cfg = TrainConfig {
            latent: 32,
            hidden: 128,
            disc_hidden: 32,
            batch: 32,
            lr: 3e-3,
            epochs: 12,
            seed: 3,
            ablation,
            ..TrainConfig::default()
        };
        let r = fit(&data.dataset, &cfg)?;
        let test = evaluate(&r.best, &data.dataset, Phase::Test, &[10])?;
        let last = r.log.last().expect("at least one epoch").stats;
        println!(
            "{:<9} test HR@10 {:.4}  NDCG@10 {:.4}  (last epoch: jrl {:.3}, disc {:.3})",
            ablation.name(),
            test.mean(Metric::Hr, 10).unwrap(),
            test.mean(Metric::Ndcg, 10).unwrap(),
            last.jrl,
            last.disc
        );
    }
    Ok(())
}
