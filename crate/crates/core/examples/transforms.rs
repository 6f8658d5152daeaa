//! The five transformation kinds: penalty on random latents, and how far the
//! trained trans5 matrix is from orthogonal with and without the penalty.

use etl::cli::{synthesize, SynthOptions};
use etl::model::{Direction, PenaltyNorm, TransformActivation, TransformKind, TransformSpec};
use etl::numerics::{Matrix, Rng};
use etl::training::{fit, TrainConfig};

fn main() -> etl::Result<()> {
    let d = 8;
    let mut rng = Rng::seed_from(1);
    let z =
        |rng: &mut Rng| Matrix::from_vec(16, d, (0..16 * d).map(|_| rng.normal() as f32).collect());
    let (za, zb) = (z(&mut rng)?, z(&mut rng)?);
    for kind in TransformKind::ALL {
        let t = TransformSpec::xavier(kind, TransformActivation::Relu, d, &mut rng)?;
        let mapped = t.transform(&za, Direction::AtoB)?;
        let penalty = t.penalty_value(&za, &zb, PenaltyNorm::L1)?;
        println!(
            "{kind}: output {:?}, penalty at init {penalty:.4}",
            mapped.shape()
        );
    }

    let data = synthesize(&SynthOptions {
        n_users: 600,
        n_items: [200, 200],
        sparsity: 0.04,
        seed: 4,
        ..SynthOptions::default()
    })?;
    for lambda in [0.0, 1.0] {
        let cfg = TrainConfig {
            latent: 16,
            hidden: 64,
            disc_hidden: 16,
            batch: 32,
            lr: 3e-3,
            epochs: 10,
            lambda,
            ..TrainConfig::default()
        };
        let r = fit(&data.dataset, &cfg)?;
        let err = r.last.transform.orthogonality_error().expect("trans5");
        println!("trans5, lambda {lambda}: mean |WᵀW − I| = {err:.5}");
    }
    Ok(())
}
