//! Generate a correlated synthetic pair of domains, train full ETL, and print
//! test metrics of the best validation checkpoint.
//!
//!     cargo run --release --example synth_and_train

use etl::cli::{synthesize, SynthOptions};
use etl::dataio::{Domain, Phase};
use etl::eval::{evaluate, Metric};
use etl::training::{fit_with, TrainConfig};

fn main() -> etl::Result<()> {
    let data = synthesize(&SynthOptions {
        n_users: 1000,
        n_items: [300, 300],
        shared_dim: 8,
        specific_dim: 4,
        sparsity: 0.03,
        seed: 7,
        ..SynthOptions::default()
    })?;
    let ds = &data.dataset;
    for s in ds.stats() {
        println!("{s}");
    }

    let cfg = TrainConfig {
        latent: 32,
        hidden: 128,
        disc_hidden: 32,
        batch: 32,
        lr: 3e-3,
        epochs: 15,
        seed: 7,
        ..TrainConfig::default()
    };
    let fit = fit_with(ds, &cfg, &mut |r| {
        if let Some([a, b]) = r.val_ndcg10 {
            println!(
                "epoch {:>2}  jrl {:8.3}  gen {:.3}  val ndcg@10 {a:.4} / {b:.4}",
                r.stats.epoch, r.stats.jrl, r.stats.gen
            );
        }
    })?;
    println!("best epoch {}", fit.best_epoch);

    let report = evaluate(&fit.best, ds, Phase::Test, &cfg.cutoffs)?;
    for d in Domain::BOTH {
        println!(
            "domain {d}: HR@10 {:.4}  NDCG@10 {:.4}  MRR@10 {:.4}",
            report.get(d, Metric::Hr, 10).unwrap(),
            report.get(d, Metric::Ndcg, 10).unwrap(),
            report.get(d, Metric::Mrr, 10).unwrap()
        );
    }
    Ok(())
}
