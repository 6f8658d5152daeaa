//! The network: per-domain encoders, decoders and discriminators plus the
//! latent transformation between domains.

pub mod checkpoint;
pub mod prior;
pub mod transform;

pub use checkpoint::{
    load_checkpoint, read_checkpoint, save_checkpoint, Checkpoint, Tensor, CHECKPOINT_MAGIC,
};
pub use prior::{sample_prior, PriorKind, PriorSpec};
pub use transform::{
    orthonormalize, Direction, PenaltyNorm, PenaltyTrace, TransformActivation, TransformKind,
    TransformSpec, TransformTrace,
};

use crate::dataio::Domain;
use crate::error::{shape_err, Result};
use crate::numerics::rng::fnv1a64;
use crate::numerics::{
    sigmoid, ForwardMode, Matrix, Mlp2Input, Mlp2Params, Mlp2Trace, OutputActivation, Parameters,
    Rng, SparseRow,
};

/// Everything that fixes the parameter shapes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ModelSpec {
    pub items: [usize; 2],
    pub latent: usize,
    pub hidden: usize,
    pub disc_hidden: usize,
    pub transform: TransformKind,
    pub transform_activation: TransformActivation,
}

impl ModelSpec {
    /// 32-bit fingerprint stored in checkpoints.
    pub fn hash(&self) -> u32 {
        let canon = format!(
            "items_a={};items_b={};latent={};hidden={};disc_hidden={};transform={};activation={}",
            self.items[0],
            self.items[1],
            self.latent,
            self.hidden,
            self.disc_hidden,
            self.transform.name(),
            self.transform_activation.name()
        );
        let h = fnv1a64(canon.as_bytes());
        (h ^ (h >> 32)) as u32
    }

    pub fn validate(&self) -> Result<()> {
        if self.items.contains(&0) || self.latent == 0 || self.hidden == 0 || self.disc_hidden == 0
        {
            return Err(shape_err(format!(
                "model dimensions must be nonzero: {self:?}"
            )));
        }
        Ok(())
    }
}

/// Forward-pass regime for the stochastic parts (encoders, discriminators).
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Mode {
    Eval,
    Train { dropout: f32 },
}

impl Mode {
    fn forward(self, activation: OutputActivation) -> ForwardMode {
        match self {
            Mode::Eval => ForwardMode::eval(activation),
            Mode::Train { dropout } => ForwardMode::train(dropout, activation),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EtlModel {
    pub spec: ModelSpec,
    /// Indexed by [`Domain::index`].
    pub enc: [Mlp2Params; 2],
    pub dec: [Mlp2Params; 2],
    pub transform: TransformSpec,
    pub disc: [Mlp2Params; 2],
}

impl EtlModel {
    /// Xavier-initialized weights, zero biases. Each network draws from its
    /// own child stream so changing one part's shape leaves the rest alone.
    pub fn new(spec: ModelSpec, rng: &mut Rng) -> Result<Self> {
        spec.validate()?;
        let d = spec.latent;
        let mut enc = Vec::with_capacity(2);
        let mut dec = Vec::with_capacity(2);
        let mut disc = Vec::with_capacity(2);
        for dom in Domain::BOTH {
            let m = spec.items[dom.index()];
            enc.push(Mlp2Params::xavier(m, spec.hidden, d, &mut rng.split())?);
        }
        for dom in Domain::BOTH {
            let m = spec.items[dom.index()];
            dec.push(Mlp2Params::xavier(d, spec.hidden, m, &mut rng.split())?);
        }
        let transform = TransformSpec::xavier(
            spec.transform,
            spec.transform_activation,
            d,
            &mut rng.split(),
        )?;
        for _ in Domain::BOTH {
            disc.push(Mlp2Params::xavier(
                d,
                spec.disc_hidden,
                1,
                &mut rng.split(),
            )?);
        }
        Ok(EtlModel {
            spec,
            enc: pair(enc),
            dec: pair(dec),
            transform,
            disc: pair(disc),
        })
    }

    /// All-zero parameters with the shapes of `spec`.
    pub fn zeros(spec: ModelSpec) -> Result<Self> {
        spec.validate()?;
        let d = spec.latent;
        let [ma, mb] = spec.items;
        Ok(EtlModel {
            spec,
            enc: [
                Mlp2Params::zeros(ma, spec.hidden, d),
                Mlp2Params::zeros(mb, spec.hidden, d),
            ],
            dec: [
                Mlp2Params::zeros(d, spec.hidden, ma),
                Mlp2Params::zeros(d, spec.hidden, mb),
            ],
            transform: TransformSpec::identity(spec.transform, spec.transform_activation, d)
                .zeros_like(),
            disc: [
                Mlp2Params::zeros(d, spec.disc_hidden, 1),
                Mlp2Params::zeros(d, spec.disc_hidden, 1),
            ],
        })
    }

    pub fn zeros_like(&self) -> Self {
        EtlModel {
            spec: self.spec,
            enc: [self.enc[0].zeros_like(), self.enc[1].zeros_like()],
            dec: [self.dec[0].zeros_like(), self.dec[1].zeros_like()],
            transform: self.transform.zeros_like(),
            disc: [self.disc[0].zeros_like(), self.disc[1].zeros_like()],
        }
    }

    pub fn latent_dim(&self) -> usize {
        self.spec.latent
    }

    pub fn n_items(&self, d: Domain) -> usize {
        self.spec.items[d.index()]
    }

    pub fn validate(&self) -> Result<()> {
        for p in self.enc.iter().chain(&self.dec).chain(&self.disc) {
            p.validate()?;
        }
        self.transform.validate()?;
        let d = self.spec.latent;
        for dom in Domain::BOTH {
            let i = dom.index();
            let m = self.spec.items[i];
            if self.enc[i].input_dim() != m || self.enc[i].output_dim() != d {
                return Err(shape_err(format!(
                    "encoder {dom} does not map {m} items to {d}"
                )));
            }
            if self.dec[i].input_dim() != d || self.dec[i].output_dim() != m {
                return Err(shape_err(format!(
                    "decoder {dom} does not map {d} to {m} items"
                )));
            }
            if self.disc[i].input_dim() != d || self.disc[i].output_dim() != 1 {
                return Err(shape_err(format!("discriminator {dom} is not {d} -> 1")));
            }
        }
        if self.transform.dim() != d {
            return Err(shape_err("transform dim does not match latent dim"));
        }
        Ok(())
    }

    /// Encoder forward with trace; relu hidden, identity output.
    pub fn encode_trace(
        &self,
        rows: &[&SparseRow],
        d: Domain,
        mode: Mode,
        rng: &mut Rng,
    ) -> Result<Mlp2Trace> {
        self.enc[d.index()].forward(
            Mlp2Input::Sparse(rows),
            mode.forward(OutputActivation::Identity),
            rng,
        )
    }

    /// Deterministic latent codes.
    pub fn encode(&self, rows: &[&SparseRow], d: Domain) -> Result<Matrix> {
        let mut unused = Rng::seed_from(0);
        Ok(self
            .encode_trace(rows, d, Mode::Eval, &mut unused)?
            .output()
            .clone())
    }

    /// Decoder forward with trace. Decoders run without dropout and emit logits.
    pub fn decode_trace(&self, z: &Matrix, d: Domain) -> Result<Mlp2Trace> {
        let mut unused = Rng::seed_from(0);
        self.dec[d.index()].forward(
            Mlp2Input::Dense(z),
            ForwardMode::eval(OutputActivation::Identity),
            &mut unused,
        )
    }

    pub fn decode(&self, z: &Matrix, d: Domain) -> Result<Matrix> {
        Ok(self.decode_trace(z, d)?.output().clone())
    }

    pub fn transform(&self, z: &Matrix, dir: Direction) -> Result<Matrix> {
        self.transform.transform(z, dir)
    }

    /// Discriminator forward with trace; output is the logit.
    pub fn discriminate_trace(
        &self,
        z: &Matrix,
        d: Domain,
        mode: Mode,
        rng: &mut Rng,
    ) -> Result<Mlp2Trace> {
        self.disc[d.index()].forward(
            Mlp2Input::Dense(z),
            mode.forward(OutputActivation::Identity),
            rng,
        )
    }

    /// Probability that each row was drawn from the prior.
    pub fn discriminate(
        &self,
        z: &Matrix,
        d: Domain,
        mode: Mode,
        rng: &mut Rng,
    ) -> Result<Vec<f32>> {
        let t = self.discriminate_trace(z, d, mode, rng)?;
        Ok(t.output().data().iter().map(|&l| sigmoid(l)).collect())
    }

    /// Ranking scores: `dec_d(enc_d(rows))` logits.
    pub fn score(&self, rows: &[&SparseRow], d: Domain) -> Result<Matrix> {
        let z = self.encode(rows, d)?;
        self.decode(&z, d)
    }

    /// Named tensors with their shapes, in checkpoint order.
    pub fn tensors(&self) -> Vec<(String, Vec<usize>, &[f32])> {
        fn mlp<'a>(
            prefix: &str,
            p: &'a Mlp2Params,
            out: &mut Vec<(String, Vec<usize>, &'a [f32])>,
        ) {
            let (i, h, o) = (p.input_dim(), p.hidden_dim(), p.output_dim());
            out.push((format!("{prefix}.w1"), vec![i, h], p.w1.data()));
            out.push((format!("{prefix}.b1"), vec![h], &p.b1[..]));
            out.push((format!("{prefix}.w2"), vec![h, o], p.w2.data()));
            out.push((format!("{prefix}.b2"), vec![o], &p.b2[..]));
        }
        let mut out = Vec::new();
        for dom in Domain::BOTH {
            mlp(&format!("enc_{dom}"), &self.enc[dom.index()], &mut out);
        }
        for dom in Domain::BOTH {
            mlp(&format!("dec_{dom}"), &self.dec[dom.index()], &mut out);
        }
        for (name, m) in self
            .transform
            .tensor_names()
            .iter()
            .zip(&self.transform.mats)
        {
            out.push((
                format!("transform.{name}"),
                vec![m.rows(), m.cols()],
                m.data(),
            ));
        }
        for dom in Domain::BOTH {
            mlp(&format!("disc_{dom}"), &self.disc[dom.index()], &mut out);
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        let mut ok = true;
        self.visit("", &mut |_, t| ok &= t.iter().all(|v| v.is_finite()));
        ok
    }
}

impl Parameters for EtlModel {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &[f32])) {
        let p = |name: &str| {
            if prefix.is_empty() {
                name.to_string()
            } else {
                format!("{prefix}.{name}")
            }
        };
        for dom in Domain::BOTH {
            self.enc[dom.index()].visit(&p(&format!("enc_{dom}")), f);
        }
        for dom in Domain::BOTH {
            self.dec[dom.index()].visit(&p(&format!("dec_{dom}")), f);
        }
        self.transform.visit(&p("transform"), f);
        for dom in Domain::BOTH {
            self.disc[dom.index()].visit(&p(&format!("disc_{dom}")), f);
        }
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut [f32])) {
        let p = |name: &str| {
            if prefix.is_empty() {
                name.to_string()
            } else {
                format!("{prefix}.{name}")
            }
        };
        for dom in Domain::BOTH {
            self.enc[dom.index()].visit_mut(&p(&format!("enc_{dom}")), f);
        }
        for dom in Domain::BOTH {
            self.dec[dom.index()].visit_mut(&p(&format!("dec_{dom}")), f);
        }
        self.transform.visit_mut(&p("transform"), f);
        for dom in Domain::BOTH {
            self.disc[dom.index()].visit_mut(&p(&format!("disc_{dom}")), f);
        }
    }
}

fn pair<T>(mut v: Vec<T>) -> [T; 2] {
    let b = v.pop().expect("two entries");
    let a = v.pop().expect("two entries");
    [a, b]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> ModelSpec {
        ModelSpec {
            items: [3, 4],
            latent: 2,
            hidden: 3,
            disc_hidden: 2,
            transform: TransformKind::Trans5,
            transform_activation: TransformActivation::Relu,
        }
    }

    #[test]
    fn zero_model_encodes_to_zero_and_discriminates_half() {
        let m = EtlModel::zeros(spec()).unwrap();
        let row = SparseRow::binary(3, vec![0, 2]).unwrap();
        let z = m.encode(&[&row], Domain::A).unwrap();
        assert_eq!(z.data(), &[0.0, 0.0]);
        assert_eq!(m.decode(&z, Domain::B).unwrap().data(), &[0.0; 4]);
        let mut rng = Rng::seed_from(0);
        assert_eq!(
            m.discriminate(&z, Domain::A, Mode::Eval, &mut rng).unwrap(),
            vec![0.5]
        );
    }

    #[test]
    fn encode_matches_hand_matmul() {
        let mut m = EtlModel::zeros(spec()).unwrap();
        // 3 items → 3 hidden → 2 latent.
        m.enc[0].w1 = Matrix::from_rows(&[
            vec![1.0, 0.0, -1.0],
            vec![0.5, 2.0, 0.0],
            vec![0.0, -1.0, 3.0],
        ])
        .unwrap();
        m.enc[0].b1 = vec![0.0, 0.5, 0.0];
        m.enc[0].w2 =
            Matrix::from_rows(&[vec![1.0, 2.0], vec![0.0, 1.0], vec![-1.0, 0.5]]).unwrap();
        m.enc[0].b2 = vec![0.1, -0.1];
        let row = SparseRow::binary(3, vec![0, 2]).unwrap();
        // pre = w1[0] + w1[2] + b1 = [1, -0.5, 2]; relu = [1, 0, 2]
        // out = [1 − 2, 2 + 1] + b2 = [−0.9, 2.9]
        let z = m.encode(&[&row], Domain::A).unwrap();
        assert!((z.get(0, 0) + 0.9).abs() < 1e-6);
        assert!((z.get(0, 1) - 2.9).abs() < 1e-6);
    }

    #[test]
    fn eval_encoding_is_deterministic() {
        let mut rng = Rng::seed_from(5);
        let m = EtlModel::new(spec(), &mut rng).unwrap();
        let row = SparseRow::binary(4, vec![1, 3]).unwrap();
        assert_eq!(
            m.encode(&[&row], Domain::B).unwrap(),
            m.encode(&[&row], Domain::B).unwrap()
        );
    }

    #[test]
    fn four_generation_paths_compose() {
        let mut rng = Rng::seed_from(6);
        for kind in TransformKind::ALL {
            let s = ModelSpec {
                transform: kind,
                ..spec()
            };
            let m = EtlModel::new(s, &mut rng).unwrap();
            m.validate().unwrap();
            let ra = SparseRow::binary(3, vec![1]).unwrap();
            let rb = SparseRow::binary(4, vec![0, 3]).unwrap();
            let za = m.encode(&[&ra, &ra], Domain::A).unwrap();
            let zb = m.encode(&[&rb, &rb], Domain::B).unwrap();
            assert_eq!(m.decode(&za, Domain::A).unwrap().shape(), (2, 3));
            assert_eq!(m.decode(&zb, Domain::B).unwrap().shape(), (2, 4));
            let ab = m.transform(&za, Direction::AtoB).unwrap();
            let ba = m.transform(&zb, Direction::BtoA).unwrap();
            assert_eq!(m.decode(&ab, Domain::B).unwrap().shape(), (2, 4));
            assert_eq!(m.decode(&ba, Domain::A).unwrap().shape(), (2, 3));
        }
    }

    #[test]
    fn encode_rejects_wrong_row_dim() {
        let m = EtlModel::zeros(spec()).unwrap();
        let row = SparseRow::binary(5, vec![0]).unwrap();
        assert!(m.encode(&[&row], Domain::A).is_err());
    }

    #[test]
    fn hash_depends_on_shape() {
        let a = spec();
        let b = ModelSpec { latent: 3, ..a };
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash(), spec().hash());
    }

    #[test]
    fn tensors_and_visit_agree() {
        let mut rng = Rng::seed_from(1);
        let m = EtlModel::new(spec(), &mut rng).unwrap();
        let mut visited = Vec::new();
        m.visit("", &mut |name, t| visited.push((name.to_string(), t.len())));
        let listed: Vec<_> = m
            .tensors()
            .into_iter()
            .map(|(n, _, t)| (n, t.len()))
            .collect();
        assert_eq!(visited, listed);
    }
}
