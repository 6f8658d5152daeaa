//! Forward values and gradients of the three training objectives. Each
//! function accumulates into a caller-owned gradient buffer shaped like the
//! model, touching only the parameters its objective depends on.

use crate::dataio::Domain;
use crate::error::{Error, Result};
use crate::model::{Direction, EtlModel, Mode, PenaltyNorm};
use crate::numerics::{bce_with_logits, bce_with_logits_const, Matrix, Mlp2Trace, Rng, SparseRow};

/// Options for [`jrl_loss`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JrlOptions {
    pub lambda: f32,
    /// Include cross-domain generation and the transformation penalty.
    pub cross: bool,
    pub penalty_norm: PenaltyNorm,
    /// Encoder regime; decoders never use dropout.
    pub mode: Mode,
}

/// Components of the joint reconstruction loss.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JrlBreakdown {
    /// `dec_d(enc_d(x_d))` against `x_d`, by domain.
    pub recon: [f64; 2],
    /// `dec_d(T(enc_other(x_other)))` against `x_d`, by target domain.
    /// `None` when cross generation is off.
    pub cross: Option<[f64; 2]>,
    /// Unweighted transformation penalty; `None` when off or unconstrained.
    pub penalty: Option<f64>,
    /// `Σ recon + Σ cross + λ·penalty`.
    pub total: f64,
}

/// Output of [`jrl_loss`]: the breakdown plus the latent codes it used.
#[derive(Clone, Debug)]
pub struct JrlOutput {
    pub breakdown: JrlBreakdown,
    pub latents: [Matrix; 2],
}

/// Joint reconstruction loss on a paired batch; `rows[d]` holds domain-`d`
/// training rows of the same users in the same order.
pub fn jrl_loss(
    model: &EtlModel,
    rows: [&[&SparseRow]; 2],
    opts: &JrlOptions,
    rng: &mut Rng,
    grads: &mut EtlModel,
) -> Result<JrlOutput> {
    if rows[0].len() != rows[1].len() {
        return Err(Error::InvalidShape(format!(
            "paired batch has {} rows in a and {} in b",
            rows[0].len(),
            rows[1].len()
        )));
    }
    let enc_traces = [
        model.encode_trace(rows[0], Domain::A, opts.mode, rng)?,
        model.encode_trace(rows[1], Domain::B, opts.mode, rng)?,
    ];
    let z = [enc_traces[0].output(), enc_traces[1].output()];
    let targets = [
        Matrix::from_sparse_rows(rows[0], model.n_items(Domain::A))?,
        Matrix::from_sparse_rows(rows[1], model.n_items(Domain::B))?,
    ];

    let mut dz: Vec<Matrix> = Vec::with_capacity(2);
    let mut recon = [0.0; 2];
    for d in Domain::BOTH {
        let i = d.index();
        let trace = model.decode_trace(z[i], d)?;
        let (loss, g) = bce_with_logits(trace.output(), &targets[i])?;
        recon[i] = loss;
        let dzi = model.dec[i]
            .backward_into(&trace, &g, &mut grads.dec[i], true)?
            .expect("dense decoder input");
        dz.push(dzi);
    }

    let mut cross = None;
    let mut penalty = None;
    if opts.cross {
        let mut c = [0.0; 2];
        for d in Domain::BOTH {
            let i = d.index();
            let src = d.other().index();
            let t = model.transform.apply(z[src], Direction::into(d))?;
            let trace = model.decode_trace(t.output(), d)?;
            let (loss, g) = bce_with_logits(trace.output(), &targets[i])?;
            c[i] = loss;
            let dt = model.dec[i]
                .backward_into(&trace, &g, &mut grads.dec[i], true)?
                .expect("dense decoder input");
            let dsrc = model.transform.backward(&t, &dt, &mut grads.transform)?;
            dz[src].add_assign(&dsrc)?;
        }
        cross = Some(c);

        if let Some(trace) = model.transform.penalty(z[0], z[1], opts.penalty_norm)? {
            let (da, db) =
                model
                    .transform
                    .penalty_backward(&trace, opts.lambda, &mut grads.transform)?;
            dz[0].add_assign(&da)?;
            dz[1].add_assign(&db)?;
            penalty = Some(trace.value());
        }
    }

    for d in Domain::BOTH {
        let i = d.index();
        model.enc[i].backward_into(&enc_traces[i], &dz[i], &mut grads.enc[i], false)?;
    }

    let total = recon.iter().sum::<f64>()
        + cross.map_or(0.0, |c| c.iter().sum())
        + opts.lambda as f64 * penalty.unwrap_or(0.0);
    if !total.is_finite() {
        return Err(Error::TrainingDiverged {
            param: "jrl_loss".into(),
        });
    }
    let [za, zb] = enc_traces;
    Ok(JrlOutput {
        breakdown: JrlBreakdown {
            recon,
            cross,
            penalty,
            total,
        },
        latents: [za.output().clone(), zb.output().clone()],
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiscBreakdown {
    /// `−E log D_d(prior) − E log(1 − D_d(z_d))` per domain.
    pub per_domain: [f64; 2],
    pub total: f64,
}

/// Discriminator loss with encoded latents treated as constants. Gradients
/// go to `grads.disc` only.
pub fn prl_discriminator_loss(
    model: &EtlModel,
    latents: [&Matrix; 2],
    prior: [&Matrix; 2],
    mode: Mode,
    rng: &mut Rng,
    grads: &mut EtlModel,
) -> Result<DiscBreakdown> {
    let mut per_domain = [0.0; 2];
    for d in Domain::BOTH {
        let i = d.index();
        let real = model.discriminate_trace(prior[i], d, mode, rng)?;
        let (l_real, g_real) = bce_with_logits_const(real.output(), 1.0);
        let fake = model.discriminate_trace(latents[i], d, mode, rng)?;
        let (l_fake, g_fake) = bce_with_logits_const(fake.output(), 0.0);
        model.disc[i].backward_into(&real, &g_real, &mut grads.disc[i], false)?;
        model.disc[i].backward_into(&fake, &g_fake, &mut grads.disc[i], false)?;
        per_domain[i] = l_real + l_fake;
    }
    let total = per_domain[0] + per_domain[1];
    if !total.is_finite() {
        return Err(Error::TrainingDiverged {
            param: "disc_loss".into(),
        });
    }
    Ok(DiscBreakdown { per_domain, total })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GenBreakdown {
    /// `−E log D_d(z_d)` per domain.
    pub per_domain: [f64; 2],
    /// Sum over domains, before weighting.
    pub raw: f64,
    /// `η · raw`.
    pub weighted: f64,
}

/// Non-saturating generator loss through frozen discriminators. Gradients go
/// to `grads.enc` only, backpropagated through `enc_traces`.
pub fn prl_generator_loss(
    model: &EtlModel,
    enc_traces: [&Mlp2Trace; 2],
    eta: f32,
    mode: Mode,
    rng: &mut Rng,
    grads: &mut EtlModel,
) -> Result<GenBreakdown> {
    if eta == 0.0 {
        return Ok(GenBreakdown {
            per_domain: [0.0; 2],
            raw: 0.0,
            weighted: 0.0,
        });
    }
    let mut per_domain = [0.0; 2];
    for d in Domain::BOTH {
        let i = d.index();
        let trace = model.discriminate_trace(enc_traces[i].output(), d, mode, rng)?;
        let (loss, mut g) = bce_with_logits_const(trace.output(), 1.0);
        g.scale(eta);
        let mut frozen = model.disc[i].zeros_like();
        let dz = model.disc[i]
            .backward_into(&trace, &g, &mut frozen, true)?
            .expect("dense discriminator input");
        model.enc[i].backward_into(enc_traces[i], &dz, &mut grads.enc[i], false)?;
        per_domain[i] = loss;
    }
    let raw = per_domain[0] + per_domain[1];
    if !raw.is_finite() {
        return Err(Error::TrainingDiverged {
            param: "gen_loss".into(),
        });
    }
    Ok(GenBreakdown {
        per_domain,
        raw,
        weighted: eta as f64 * raw,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ModelSpec, TransformActivation, TransformKind};
    use crate::numerics::Parameters;

    fn spec(kind: TransformKind) -> ModelSpec {
        ModelSpec {
            items: [6, 5],
            latent: 3,
            hidden: 4,
            disc_hidden: 3,
            transform: kind,
            transform_activation: TransformActivation::Relu,
        }
    }

    fn rows() -> [Vec<SparseRow>; 2] {
        [
            vec![
                SparseRow::binary(6, vec![0, 2]).unwrap(),
                SparseRow::binary(6, vec![1, 3, 5]).unwrap(),
            ],
            vec![
                SparseRow::binary(5, vec![4]).unwrap(),
                SparseRow::binary(5, vec![0, 1]).unwrap(),
            ],
        ]
    }

    fn opts(lambda: f32, cross: bool) -> JrlOptions {
        JrlOptions {
            lambda,
            cross,
            penalty_norm: PenaltyNorm::L1,
            mode: Mode::Eval,
        }
    }

    #[test]
    fn rigged_decoders_and_orthogonal_w_give_near_zero_loss() {
        let mut m = EtlModel::zeros(spec(TransformKind::Trans5)).unwrap();
        m.transform.mats[0] = Matrix::identity(3);
        let r = rows();
        for d in Domain::BOTH {
            let i = d.index();
            let n = m.n_items(d);
            // Bias alone decides: +40 on items every row has, −40 elsewhere
            // only works when all rows agree, so use a single row per domain.
            let target = r[i][0].to_dense();
            m.dec[i].b2 = target
                .iter()
                .map(|&t| if t > 0.0 { 40.0 } else { -40.0 })
                .collect();
            assert_eq!(m.dec[i].b2.len(), n);
        }
        let a = [&r[0][0]];
        let b = [&r[1][0]];
        let mut g = m.zeros_like();
        let out = jrl_loss(
            &m,
            [&a, &b],
            &opts(1.0, true),
            &mut Rng::seed_from(0),
            &mut g,
        )
        .unwrap();
        assert!(out.breakdown.total < 1e-3, "{:?}", out.breakdown);
    }

    #[test]
    fn lambda_zero_is_pure_bce_sum() {
        let mut rng = Rng::seed_from(3);
        let m = EtlModel::new(spec(TransformKind::Trans5), &mut rng).unwrap();
        let r = rows();
        let a: Vec<&SparseRow> = r[0].iter().collect();
        let b: Vec<&SparseRow> = r[1].iter().collect();
        let mut g = m.zeros_like();
        let out = jrl_loss(&m, [&a, &b], &opts(0.0, true), &mut rng, &mut g).unwrap();
        let br = out.breakdown;
        let sum = br.recon[0] + br.recon[1] + br.cross.unwrap().iter().sum::<f64>();
        assert_eq!(br.total, sum);
        assert!(br.penalty.unwrap() > 0.0);
    }

    #[test]
    fn no_cross_means_no_penalty_or_transform_gradient() {
        let mut rng = Rng::seed_from(3);
        let m = EtlModel::new(spec(TransformKind::Trans5), &mut rng).unwrap();
        let r = rows();
        let a: Vec<&SparseRow> = r[0].iter().collect();
        let b: Vec<&SparseRow> = r[1].iter().collect();
        let mut g = m.zeros_like();
        let out = jrl_loss(&m, [&a, &b], &opts(5.0, false), &mut rng, &mut g).unwrap();
        assert!(out.breakdown.cross.is_none() && out.breakdown.penalty.is_none());
        assert_eq!(
            out.breakdown.total,
            out.breakdown.recon[0] + out.breakdown.recon[1]
        );
        let mut all_zero = true;
        g.transform
            .visit("t", &mut |_, t| all_zero &= t.iter().all(|&v| v == 0.0));
        assert!(all_zero);
    }

    #[test]
    fn half_discriminators_give_four_ln2() {
        let m = EtlModel::zeros(spec(TransformKind::Trans5)).unwrap();
        let z = Matrix::filled(4, 3, 0.3);
        let mut g = m.zeros_like();
        let mut rng = Rng::seed_from(0);
        let d =
            prl_discriminator_loss(&m, [&z, &z], [&z, &z], Mode::Eval, &mut rng, &mut g).unwrap();
        assert!((d.total - 4.0 * std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn generator_at_half_and_at_zero_eta() {
        let m = EtlModel::zeros(spec(TransformKind::Trans5)).unwrap();
        let r = rows();
        let a: Vec<&SparseRow> = r[0].iter().collect();
        let b: Vec<&SparseRow> = r[1].iter().collect();
        let mut rng = Rng::seed_from(0);
        let ta = m.encode_trace(&a, Domain::A, Mode::Eval, &mut rng).unwrap();
        let tb = m.encode_trace(&b, Domain::B, Mode::Eval, &mut rng).unwrap();
        let mut g = m.zeros_like();
        let gen = prl_generator_loss(&m, [&ta, &tb], 0.5, Mode::Eval, &mut rng, &mut g).unwrap();
        assert!((gen.weighted - 0.5 * 2.0 * std::f64::consts::LN_2).abs() < 1e-12);

        let mut g0 = m.zeros_like();
        let gen0 = prl_generator_loss(&m, [&ta, &tb], 0.0, Mode::Eval, &mut rng, &mut g0).unwrap();
        assert_eq!(gen0.weighted, 0.0);
        assert_eq!(g0, m.zeros_like());
    }
}
