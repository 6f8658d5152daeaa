//! Train briefly, write an ETL1 checkpoint, load it back and evaluate on the
//! validation and test items. An untrained model and a random scorer give
//! the chance baselines.

use etl::cli::{synthesize, SynthOptions};
use etl::dataio::{Domain, Phase};
use etl::eval::{evaluate, Metric, Scorer};
use etl::model::{load_checkpoint, save_checkpoint, EtlModel};
use etl::numerics::{Matrix, Rng, SparseRow};
use etl::training::{fit, TrainConfig};

struct RandomScorer(std::cell::RefCell<Rng>);

impl Scorer for RandomScorer {
    fn score(&self, rows: &[&SparseRow], _d: Domain) -> etl::Result<Matrix> {
        let dim = rows[0].dim();
        let mut rng = self.0.borrow_mut();
        Matrix::from_vec(
            rows.len(),
            dim,
            (0..rows.len() * dim).map(|_| rng.uniform()).collect(),
        )
    }
}

fn main() -> etl::Result<()> {
    let data = synthesize(&SynthOptions {
        n_users: 600,
        n_items: [200, 200],
        sparsity: 0.04,
        seed: 11,
        ..SynthOptions::default()
    })?;
    let ds = &data.dataset;
    let items = [
        ds.domain(Domain::A).n_items(),
        ds.domain(Domain::B).n_items(),
    ];
    let cfg = TrainConfig {
        latent: 16,
        hidden: 64,
        disc_hidden: 16,
        batch: 32,
        lr: 3e-3,
        epochs: 8,
        ..TrainConfig::default()
    };

    let dir = tempfile::tempdir().map_err(|e| etl::Error::io(".", e))?;
    let path = dir.path().join("model.etl1");
    save_checkpoint(&fit(ds, &cfg)?.best, &path)?;
    let model = load_checkpoint(&path, cfg.model_spec(items))?;
    println!(
        "checkpoint {} ({} bytes)",
        path.display(),
        std::fs::metadata(&path).map(|m| m.len()).unwrap_or(0)
    );

    let untrained = EtlModel::new(cfg.model_spec(items), &mut Rng::seed_from(99))?;
    let random = RandomScorer(std::cell::RefCell::new(Rng::seed_from(5)));
    for (name, scorer) in [
        ("trained", &model as &dyn Scorer),
        ("untrained", &untrained),
        ("random", &random),
    ] {
        for phase in [Phase::Val, Phase::Test] {
            let r = evaluate(scorer, ds, phase, &[5, 10])?;
            println!(
                "{name:<9} {:<4} HR@5 {:.4}  HR@10 {:.4}  NDCG@10 {:.4}",
                phase.name(),
                r.mean(Metric::Hr, 5).unwrap(),
                r.mean(Metric::Hr, 10).unwrap(),
                r.mean(Metric::Ndcg, 10).unwrap()
            );
        }
    }
    Ok(())
}
