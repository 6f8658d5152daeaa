//! Samples from each prior, and how close trained latents get to a Gaussian
//! prior as η grows (MMD against fresh prior samples).

use etl::analysis::{encode_all, mmd_rbf, DEFAULT_SIGMAS};
use etl::cli::{synthesize, SynthOptions};
use etl::model::{sample_prior, PriorKind, PriorSpec};
use etl::numerics::Rng;
use etl::training::{fit, TrainConfig};

fn main() -> etl::Result<()> {
    let mut rng = Rng::seed_from(0);
    for kind in [
        PriorKind::Gaussian,
        PriorKind::Laplace,
        PriorKind::Uniform,
        PriorKind::MvGaussian,
    ] {
        let s = sample_prior(PriorSpec { kind, dim: 4 }, 5000, &mut rng)?;
        let n = s.data().len() as f64;
        let mean = s.data().iter().map(|&v| v as f64).sum::<f64>() / n;
        let var = s
            .data()
            .iter()
            .map(|&v| (v as f64 - mean).powi(2))
            .sum::<f64>()
            / n;
        println!("{:<11} mean {mean:+.3}  var {var:.3}", kind.name());
    }

    let data = synthesize(&SynthOptions {
        n_users: 600,
        n_items: [200, 200],
        sparsity: 0.04,
        seed: 8,
        ..SynthOptions::default()
    })?;
    for eta in [0.0, 1.0, 5.0] {
        let cfg = TrainConfig {
            latent: 8,
            hidden: 64,
            disc_hidden: 32,
            batch: 32,
            lr: 3e-3,
            epochs: 10,
            eta,
            ..TrainConfig::default()
        };
        let model = fit(&data.dataset, &cfg)?.last;
        let [za, _] = encode_all(&model, &data.dataset)?;
        let prior = sample_prior(
            PriorSpec {
                kind: PriorKind::Gaussian,
                dim: 8,
            },
            za.rows(),
            &mut rng,
        )?;
        println!(
            "eta {eta}: mmd(z_a, prior) {:.4}",
            mmd_rbf(&za, &prior, &DEFAULT_SIGMAS)?
        );
    }
    Ok(())
}
