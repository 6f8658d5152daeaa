//! Independent f64 reference implementations shared by the integration tests.
//! Nothing here calls into the library's numerics; parameters are copied out
//! of the public fields and everything is recomputed from scratch.

#![allow(dead_code)]

use etl::dataio::Domain;
use etl::model::{EtlModel, PenaltyNorm, TransformActivation, TransformKind};
use etl::numerics::{Matrix, Mlp2Params, Parameters, Rng, SparseRow};
use etl::training::loss::{jrl_loss, prl_discriminator_loss, prl_generator_loss, JrlOptions};

pub type M = Vec<Vec<f64>>;

pub fn to_m(m: &Matrix) -> M {
    (0..m.rows())
        .map(|r| m.row(r).iter().map(|&v| v as f64).collect())
        .collect()
}

pub fn dense(rows: &[SparseRow]) -> M {
    rows.iter()
        .map(|r| r.to_dense().into_iter().map(f64::from).collect())
        .collect()
}

fn matmul(x: &M, w: &M) -> M {
    x.iter()
        .map(|row| {
            (0..w[0].len())
                .map(|j| row.iter().zip(w).map(|(a, wr)| a * wr[j]).sum())
                .collect()
        })
        .collect()
}

fn transpose(w: &M) -> M {
    (0..w[0].len())
        .map(|j| w.iter().map(|r| r[j]).collect())
        .collect()
}

#[derive(Clone, Debug)]
pub struct RefMlp {
    pub w1: M,
    pub b1: Vec<f64>,
    pub w2: M,
    pub b2: Vec<f64>,
}

impl RefMlp {
    pub fn from(p: &Mlp2Params) -> Self {
        RefMlp {
            w1: to_m(&p.w1),
            b1: p.b1.iter().map(|&v| v as f64).collect(),
            w2: to_m(&p.w2),
            b2: p.b2.iter().map(|&v| v as f64).collect(),
        }
    }

    /// `relu(x·W1 + b1)·W2 + b2`
    pub fn forward(&self, x: &M) -> M {
        let mut h = matmul(x, &self.w1);
        for row in h.iter_mut() {
            for (v, b) in row.iter_mut().zip(&self.b1) {
                *v = (*v + b).max(0.0);
            }
        }
        let mut o = matmul(&h, &self.w2);
        for row in o.iter_mut() {
            for (v, b) in row.iter_mut().zip(&self.b2) {
                *v += b;
            }
        }
        o
    }

    fn slots(&mut self) -> Vec<&mut f64> {
        let mut v: Vec<&mut f64> = Vec::new();
        v.extend(self.w1.iter_mut().flatten());
        v.extend(self.b1.iter_mut());
        v.extend(self.w2.iter_mut().flatten());
        v.extend(self.b2.iter_mut());
        v
    }
}

#[derive(Clone, Debug)]
pub struct RefModel {
    pub enc: [RefMlp; 2],
    pub dec: [RefMlp; 2],
    pub disc: [RefMlp; 2],
    pub kind: TransformKind,
    pub activation: TransformActivation,
    pub mats: Vec<M>,
}

impl RefModel {
    pub fn from(m: &EtlModel) -> Self {
        let pair = |p: &[Mlp2Params; 2]| [RefMlp::from(&p[0]), RefMlp::from(&p[1])];
        RefModel {
            enc: pair(&m.enc),
            dec: pair(&m.dec),
            disc: pair(&m.disc),
            kind: m.transform.kind,
            activation: m.transform.activation,
            mats: m.transform.mats.iter().map(to_m).collect(),
        }
    }

    fn act(&self, x: f64) -> f64 {
        match self.activation {
            TransformActivation::Relu => x.max(0.0),
            TransformActivation::Tanh => x.tanh(),
        }
    }

    /// `a_to_b`: map from domain a into domain b.
    pub fn transform(&self, z: &M, a_to_b: bool) -> M {
        match self.kind {
            TransformKind::Trans1 | TransformKind::Trans3 => {
                matmul(z, &self.mats[if a_to_b { 0 } else { 1 }])
            }
            TransformKind::Trans2 | TransformKind::Trans4 => {
                let (w1, w2) = if a_to_b {
                    (&self.mats[0], &self.mats[1])
                } else {
                    (&self.mats[2], &self.mats[3])
                };
                let h: M = matmul(z, w1)
                    .into_iter()
                    .map(|r| r.into_iter().map(|v| self.act(v)).collect())
                    .collect();
                matmul(&h, w2)
            }
            TransformKind::Trans5 => {
                if a_to_b {
                    matmul(z, &transpose(&self.mats[0]))
                } else {
                    matmul(z, &self.mats[0])
                }
            }
        }
    }

    pub fn penalty(&self, za: &M, zb: &M, norm: PenaltyNorm) -> f64 {
        if matches!(self.kind, TransformKind::Trans1 | TransformKind::Trans2) {
            return 0.0;
        }
        let cyc_a = self.transform(&self.transform(za, true), false);
        let cyc_b = self.transform(&self.transform(zb, false), true);
        let row_norm = |z: &M, c: &M| -> f64 {
            let total: f64 = z
                .iter()
                .zip(c)
                .map(|(zr, cr)| {
                    let diffs = zr.iter().zip(cr).map(|(a, b)| a - b);
                    match norm {
                        PenaltyNorm::L1 => diffs.map(f64::abs).sum::<f64>(),
                        PenaltyNorm::Frobenius => diffs.map(|d| d * d).sum::<f64>().sqrt(),
                    }
                })
                .sum();
            total / z.len() as f64
        };
        row_norm(za, &cyc_a) + row_norm(zb, &cyc_b)
    }

    /// Visits every scalar parameter in a fixed order.
    pub fn slots(&mut self) -> Vec<(String, &mut f64)> {
        let mut out = Vec::new();
        for (name, nets) in [
            ("enc", &mut self.enc),
            ("dec", &mut self.dec),
            ("disc", &mut self.disc),
        ] {
            for (d, net) in nets.iter_mut().enumerate() {
                for (k, s) in net.slots().into_iter().enumerate() {
                    out.push((format!("{name}_{}[{k}]", ["a", "b"][d]), s));
                }
            }
        }
        for (t, m) in self.mats.iter_mut().enumerate() {
            for (k, s) in m.iter_mut().flatten().enumerate() {
                out.push((format!("transform{t}[{k}]"), s));
            }
        }
        out
    }
}

fn bce(l: f64, t: f64) -> f64 {
    // −[t log σ(l) + (1−t) log(1−σ(l))], written without the fused trick.
    let p = 1.0 / (1.0 + (-l).exp());
    -(t * p.ln() + (1.0 - t) * (1.0 - p).ln())
}

/// Summed over columns, averaged over rows.
pub fn bce_rows(logits: &M, targets: &M) -> f64 {
    let total: f64 = logits
        .iter()
        .zip(targets)
        .map(|(lr, tr)| lr.iter().zip(tr).map(|(&l, &t)| bce(l, t)).sum::<f64>())
        .sum();
    total / logits.len() as f64
}

pub fn bce_const(logits: &M, t: f64) -> f64 {
    logits.iter().map(|r| bce(r[0], t)).sum::<f64>() / logits.len() as f64
}

pub fn ref_jrl(m: &RefModel, x: [&M; 2], lambda: f64, cross: bool, norm: PenaltyNorm) -> f64 {
    let z = [m.enc[0].forward(x[0]), m.enc[1].forward(x[1])];
    let mut total =
        bce_rows(&m.dec[0].forward(&z[0]), x[0]) + bce_rows(&m.dec[1].forward(&z[1]), x[1]);
    if cross {
        total += bce_rows(&m.dec[0].forward(&m.transform(&z[1], false)), x[0]);
        total += bce_rows(&m.dec[1].forward(&m.transform(&z[0], true)), x[1]);
        total += lambda * m.penalty(&z[0], &z[1], norm);
    }
    total
}

pub fn ref_disc(m: &RefModel, z: [&M; 2], prior: [&M; 2]) -> f64 {
    (0..2)
        .map(|i| {
            bce_const(&m.disc[i].forward(prior[i]), 1.0) + bce_const(&m.disc[i].forward(z[i]), 0.0)
        })
        .sum()
}

pub fn ref_gen(m: &RefModel, x: [&M; 2], eta: f64) -> f64 {
    eta * (0..2)
        .map(|i| bce_const(&m.disc[i].forward(&m.enc[i].forward(x[i])), 1.0))
        .sum::<f64>()
}

/// Flattens analytic gradients in the same order as [`RefModel::slots`].
pub fn flat_grads(g: &EtlModel) -> Vec<f64> {
    let mut out = Vec::new();
    for nets in [&g.enc, &g.dec, &g.disc] {
        for p in nets {
            out.extend(p.w1.data().iter().map(|&v| v as f64));
            out.extend(p.b1.iter().map(|&v| v as f64));
            out.extend(p.w2.data().iter().map(|&v| v as f64));
            out.extend(p.b2.iter().map(|&v| v as f64));
        }
    }
    for m in &g.transform.mats {
        out.extend(m.data().iter().map(|&v| v as f64));
    }
    out
}

/// Central differences of `f` over every slot of `base`.
pub fn numeric_grads(base: &RefModel, f: &dyn Fn(&RefModel) -> f64) -> Vec<f64> {
    let h = 1e-6;
    let n = base.clone().slots().len();
    (0..n)
        .map(|k| {
            let mut plus = base.clone();
            *plus.slots()[k].1 += h;
            let mut minus = base.clone();
            *minus.slots()[k].1 -= h;
            (f(&plus) - f(&minus)) / (2.0 * h)
        })
        .collect()
}

/// Relative error with an absolute floor for near-zero components, where
/// f32 rounding in the analytic gradient dominates.
pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / (analytic.abs().max(numeric.abs())).max(1e-3)
}

/// A random toy instance: `n` users, item counts, latent `d`, and a model
/// with every parameter (biases included) drawn from N(0, 0.5²).
pub struct Toy {
    pub model: EtlModel,
    pub rows: [Vec<SparseRow>; 2],
}

pub fn toy(seed: u64, kind: TransformKind, activation: TransformActivation) -> Toy {
    let mut rng = Rng::seed_from(seed);
    let n = 3 + rng.below(8);
    let items = [4 + rng.below(9), 4 + rng.below(9)];
    let d = 2 + rng.below(7);
    let spec = etl::model::ModelSpec {
        items,
        latent: d,
        hidden: 3 + rng.below(4),
        disc_hidden: 2 + rng.below(4),
        transform: kind,
        transform_activation: activation,
    };
    let mut model = EtlModel::new(spec, &mut rng).unwrap();
    model.visit_mut("", &mut |_, t| {
        for v in t.iter_mut() {
            *v = (0.5 * rng.normal()) as f32;
        }
    });
    let rows = [0, 1].map(|i| {
        (0..n)
            .map(|_| {
                let mut idx: Vec<u32> = (0..items[i] as u32)
                    .filter(|_| rng.uniform() < 0.4)
                    .collect();
                if idx.is_empty() {
                    idx.push(rng.below(items[i]) as u32);
                }
                SparseRow::binary(items[i], idx).unwrap()
            })
            .collect()
    });
    Toy { model, rows }
}

/// Worst relative error over all parameters for the three losses of one
/// toy instance: (jrl, disc, gen, number of parameters).
pub fn gradient_check(seed: u64, kind: TransformKind, norm: PenaltyNorm) -> (f64, f64, f64, usize) {
    let activation = if seed.is_multiple_of(2) {
        TransformActivation::Relu
    } else {
        TransformActivation::Tanh
    };
    let t = toy(seed, kind, activation);
    let refm = RefModel::from(&t.model);
    let x = [dense(&t.rows[0]), dense(&t.rows[1])];
    let rr: [Vec<&SparseRow>; 2] = [t.rows[0].iter().collect(), t.rows[1].iter().collect()];
    let mut rng = Rng::seed_from(seed ^ 0xabc);
    let lambda = 0.3 + rng.uniform() as f64 * 2.0;
    let eta = 0.5 + rng.uniform() as f64;
    let worst = |a: &[f64], n: &[f64], only: &dyn Fn(usize) -> bool| -> f64 {
        a.iter()
            .zip(n)
            .enumerate()
            .filter(|(k, _)| only(*k))
            .map(|(_, (&a, &n))| rel_err(a, n))
            .fold(0.0, f64::max)
    };

    let mut g = t.model.zeros_like();
    let opts = JrlOptions {
        lambda: lambda as f32,
        cross: true,
        penalty_norm: norm,
        mode: etl::model::Mode::Eval,
    };
    jrl_loss(&t.model, [&rr[0], &rr[1]], &opts, &mut rng, &mut g).unwrap();
    let num = numeric_grads(&refm, &|m| ref_jrl(m, [&x[0], &x[1]], lambda, true, norm));
    let jrl = worst(&flat_grads(&g), &num, &|_| true);

    let z = [
        t.model.encode(&rr[0], Domain::A).unwrap(),
        t.model.encode(&rr[1], Domain::B).unwrap(),
    ];
    let prior = [0, 1].map(|_| {
        Matrix::from_vec(
            z[0].rows(),
            z[0].cols(),
            (0..z[0].data().len())
                .map(|_| rng.normal() as f32)
                .collect(),
        )
        .unwrap()
    });
    let mut g = t.model.zeros_like();
    prl_discriminator_loss(
        &t.model,
        [&z[0], &z[1]],
        [&prior[0], &prior[1]],
        etl::model::Mode::Eval,
        &mut rng,
        &mut g,
    )
    .unwrap();
    let (zm, pm) = (
        [to_m(&z[0]), to_m(&z[1])],
        [to_m(&prior[0]), to_m(&prior[1])],
    );
    let num = numeric_grads(&refm, &|m| ref_disc(m, [&zm[0], &zm[1]], [&pm[0], &pm[1]]));
    let disc = worst(&flat_grads(&g), &num, &|_| true);

    let traces = [
        t.model
            .encode_trace(&rr[0], Domain::A, etl::model::Mode::Eval, &mut rng)
            .unwrap(),
        t.model
            .encode_trace(&rr[1], Domain::B, etl::model::Mode::Eval, &mut rng)
            .unwrap(),
    ];
    let mut g = t.model.zeros_like();
    prl_generator_loss(
        &t.model,
        [&traces[0], &traces[1]],
        eta as f32,
        etl::model::Mode::Eval,
        &mut rng,
        &mut g,
    )
    .unwrap();
    let num_full = numeric_grads(&refm, &|m| ref_gen(m, [&x[0], &x[1]], eta));
    // Discriminators are frozen in the generator step: compare encoder slots,
    // and require zero analytic gradient everywhere else.
    let n_enc = {
        let mut r = refm.clone();
        r.slots()
            .iter()
            .filter(|(n, _)| n.starts_with("enc"))
            .count()
    };
    let analytic = flat_grads(&g);
    let gen = worst(&analytic, &num_full, &|k| k < n_enc);
    assert!(
        analytic[n_enc..].iter().all(|&v| v == 0.0),
        "generator step touched non-encoder parameters"
    );

    (jrl, disc, gen, analytic.len())
}

/// Brute-force 1-based rank: count candidates that beat the target, where a
/// tie is won by the smaller item id.
pub fn brute_rank(scores: &[f32], target: u32, negatives: &[u32]) -> usize {
    let t = scores[target as usize];
    1 + negatives
        .iter()
        .filter(|&&j| {
            let s = scores[j as usize];
            s > t || (s == t && j < target)
        })
        .count()
}

pub fn brute_metrics(rank: usize, k: usize) -> (f64, f64, f64) {
    if rank > k {
        (0.0, 0.0, 0.0)
    } else {
        (1.0, 1.0 / ((rank + 1) as f64).log2(), 1.0 / rank as f64)
    }
}

/// Double-loop biased MMD² with a sum of RBF kernels.
pub fn mmd_oracle(x: &M, y: &M, sigmas: &[f64]) -> f64 {
    let k = |a: &[f64], b: &[f64]| -> f64 {
        let d2: f64 = a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum();
        sigmas.iter().map(|s| (-d2 / (2.0 * s * s)).exp()).sum()
    };
    let mean = |p: &M, q: &M| -> f64 {
        let mut s = 0.0;
        for a in p {
            for b in q {
                s += k(a, b);
            }
        }
        s / (p.len() * q.len()) as f64
    };
    mean(x, x) + mean(y, y) - 2.0 * mean(x, y)
}
