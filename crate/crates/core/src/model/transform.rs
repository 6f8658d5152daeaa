//! Latent maps between the two domains.
//!
//! | kind   | map                          | constraint                 |
//! |--------|------------------------------|----------------------------|
//! | trans1 | `z·W_dir`                    | none                       |
//! | trans2 | `act(z·W¹_dir)·W²_dir`       | none                       |
//! | trans3 | `z·W_dir`                    | cycle error                |
//! | trans4 | `act(z·W¹_dir)·W²_dir`       | cycle error                |
//! | trans5 | a→b `z·Wᵀ`, b→a `z·W`        | `z − z·WᵀW`, `z − z·W·Wᵀ`  |
//!
//! For every constrained kind the penalty is the batch mean of
//! `‖z_a − T_ba(T_ab(z_a))‖ + ‖z_b − T_ab(T_ba(z_b))‖`, which for trans5 is
//! exactly the orthogonality penalty.

use std::fmt;
use std::str::FromStr;

use crate::dataio::Domain;
use crate::error::{shape_err, Error, Result};
use crate::numerics::{xavier_init, Matrix, Parameters, Rng};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TransformKind {
    Trans1,
    Trans2,
    Trans3,
    Trans4,
    Trans5,
}

impl TransformKind {
    pub const ALL: [TransformKind; 5] = [
        TransformKind::Trans1,
        TransformKind::Trans2,
        TransformKind::Trans3,
        TransformKind::Trans4,
        TransformKind::Trans5,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TransformKind::Trans1 => "trans1",
            TransformKind::Trans2 => "trans2",
            TransformKind::Trans3 => "trans3",
            TransformKind::Trans4 => "trans4",
            TransformKind::Trans5 => "trans5",
        }
    }

    pub fn is_constrained(self) -> bool {
        matches!(
            self,
            TransformKind::Trans3 | TransformKind::Trans4 | TransformKind::Trans5
        )
    }

    fn is_nonlinear(self) -> bool {
        matches!(self, TransformKind::Trans2 | TransformKind::Trans4)
    }

    fn tensor_names(self) -> &'static [&'static str] {
        match self {
            TransformKind::Trans1 | TransformKind::Trans3 => &["w_ab", "w_ba"],
            TransformKind::Trans2 | TransformKind::Trans4 => &["w1_ab", "w2_ab", "w1_ba", "w2_ba"],
            TransformKind::Trans5 => &["w"],
        }
    }
}

impl fmt::Display for TransformKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TransformKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TransformKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown transform kind `{s}`")))
    }
}

/// Hidden nonlinearity of trans2/trans4.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TransformActivation {
    Relu,
    Tanh,
}

impl TransformActivation {
    pub fn name(self) -> &'static str {
        match self {
            TransformActivation::Relu => "relu",
            TransformActivation::Tanh => "tanh",
        }
    }

    fn apply(self, x: f32) -> f32 {
        match self {
            TransformActivation::Relu => x.max(0.0),
            TransformActivation::Tanh => x.tanh(),
        }
    }

    /// Derivative expressed through the pre-activation `x` and output `y`.
    fn derivative(self, x: f32, y: f32) -> f32 {
        match self {
            TransformActivation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            TransformActivation::Tanh => 1.0 - y * y,
        }
    }
}

impl FromStr for TransformActivation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "relu" => Ok(TransformActivation::Relu),
            "tanh" => Ok(TransformActivation::Tanh),
            other => Err(Error::Config(format!(
                "unknown transform activation `{other}`"
            ))),
        }
    }
}

/// Norm applied to each row of a cycle residual.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PenaltyNorm {
    L1,
    /// Euclidean norm of each row.
    Frobenius,
}

impl PenaltyNorm {
    pub fn name(self) -> &'static str {
        match self {
            PenaltyNorm::L1 => "l1",
            PenaltyNorm::Frobenius => "frobenius",
        }
    }
}

impl FromStr for PenaltyNorm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "l1" => Ok(PenaltyNorm::L1),
            "frobenius" | "l2" => Ok(PenaltyNorm::Frobenius),
            other => Err(Error::Config(format!("unknown penalty norm `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Direction {
    AtoB,
    BtoA,
}

impl Direction {
    /// The direction that lands in `target`.
    pub fn into(target: Domain) -> Direction {
        match target {
            Domain::A => Direction::BtoA,
            Domain::B => Direction::AtoB,
        }
    }

    pub fn reverse(self) -> Direction {
        match self {
            Direction::AtoB => Direction::BtoA,
            Direction::BtoA => Direction::AtoB,
        }
    }
}

/// Transformation parameters. Tensor layout is fixed by `kind`:
/// trans1/3 hold `[W_ab, W_ba]`, trans2/4 hold `[W¹_ab, W²_ab, W¹_ba, W²_ba]`,
/// trans5 holds `[W]`. Every tensor is `d×d`.
#[derive(Clone, Debug, PartialEq)]
pub struct TransformSpec {
    pub kind: TransformKind,
    pub activation: TransformActivation,
    pub mats: Vec<Matrix>,
}

/// Values kept from [`TransformSpec::apply`] for the backward pass.
#[derive(Clone, Debug)]
pub struct TransformTrace {
    dir: Direction,
    input: Matrix,
    /// Pre-activation and activation of the hidden layer (nonlinear kinds).
    hidden: Option<(Matrix, Matrix)>,
    output: Matrix,
}

impl TransformTrace {
    pub fn output(&self) -> &Matrix {
        &self.output
    }

    pub fn into_output(self) -> Matrix {
        self.output
    }
}

/// Forward values of the cycle penalty.
#[derive(Clone, Debug)]
pub struct PenaltyTrace {
    cycles: [(TransformTrace, TransformTrace); 2],
    residuals: [Matrix; 2],
    norm: PenaltyNorm,
    value: f64,
}

impl PenaltyTrace {
    pub fn value(&self) -> f64 {
        self.value
    }
}

impl TransformSpec {
    pub fn xavier(
        kind: TransformKind,
        activation: TransformActivation,
        d: usize,
        rng: &mut Rng,
    ) -> Result<Self> {
        let mats = kind
            .tensor_names()
            .iter()
            .map(|_| xavier_init(d, d, rng))
            .collect::<Result<_>>()?;
        Ok(TransformSpec {
            kind,
            activation,
            mats,
        })
    }

    /// Identity maps in both directions; the hidden width of nonlinear kinds
    /// is also `d`, so with relu this is identity only on the positive orthant.
    pub fn identity(kind: TransformKind, activation: TransformActivation, d: usize) -> Self {
        let mats = kind
            .tensor_names()
            .iter()
            .map(|_| Matrix::identity(d))
            .collect();
        TransformSpec {
            kind,
            activation,
            mats,
        }
    }

    pub fn zeros_like(&self) -> Self {
        TransformSpec {
            kind: self.kind,
            activation: self.activation,
            mats: self
                .mats
                .iter()
                .map(|m| Matrix::zeros(m.rows(), m.cols()))
                .collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.mats[0].rows()
    }

    pub fn tensor_names(&self) -> &'static [&'static str] {
        self.kind.tensor_names()
    }

    pub fn validate(&self) -> Result<()> {
        let names = self.kind.tensor_names();
        if self.mats.len() != names.len() {
            return Err(shape_err(format!(
                "{} expects {} tensors, got {}",
                self.kind,
                names.len(),
                self.mats.len()
            )));
        }
        let d = self.dim();
        if self.mats.iter().any(|m| m.shape() != (d, d)) {
            return Err(shape_err(format!(
                "{} tensors must all be {d}x{d}",
                self.kind
            )));
        }
        Ok(())
    }

    fn check_input(&self, z: &Matrix) -> Result<()> {
        if z.cols() != self.dim() {
            return Err(shape_err(format!(
                "latent width {} does not match transform dim {}",
                z.cols(),
                self.dim()
            )));
        }
        Ok(())
    }

    fn layer_indices(&self, dir: Direction) -> (usize, usize) {
        match (self.kind.is_nonlinear(), dir) {
            (true, Direction::AtoB) => (0, 1),
            (true, Direction::BtoA) => (2, 3),
            (false, Direction::AtoB) => (0, 0),
            (false, Direction::BtoA) => (1, 1),
        }
    }

    pub fn apply(&self, z: &Matrix, dir: Direction) -> Result<TransformTrace> {
        self.check_input(z)?;
        let (output, hidden) = if self.kind == TransformKind::Trans5 {
            let w = &self.mats[0];
            let out = match dir {
                Direction::AtoB => z.matmul_t(w)?,
                Direction::BtoA => z.matmul(w)?,
            };
            (out, None)
        } else if self.kind.is_nonlinear() {
            let (i1, i2) = self.layer_indices(dir);
            let pre = z.matmul(&self.mats[i1])?;
            let mut act = pre.clone();
            for v in act.data_mut() {
                *v = self.activation.apply(*v);
            }
            let out = act.matmul(&self.mats[i2])?;
            (out, Some((pre, act)))
        } else {
            let (i, _) = self.layer_indices(dir);
            (z.matmul(&self.mats[i])?, None)
        };
        Ok(TransformTrace {
            dir,
            input: z.clone(),
            hidden,
            output,
        })
    }

    /// Forward map without the trace.
    pub fn transform(&self, z: &Matrix, dir: Direction) -> Result<Matrix> {
        Ok(self.apply(z, dir)?.into_output())
    }

    /// Accumulates parameter gradients into `grads`; returns ∂L/∂input.
    pub fn backward(
        &self,
        trace: &TransformTrace,
        upstream: &Matrix,
        grads: &mut TransformSpec,
    ) -> Result<Matrix> {
        if upstream.shape() != trace.output.shape() {
            return Err(shape_err(
                "transform upstream gradient does not match output",
            ));
        }
        if self.kind == TransformKind::Trans5 {
            let w = &self.mats[0];
            return match trace.dir {
                // out = z·Wᵀ: dW = gᵀ·z, dz = g·W
                Direction::AtoB => {
                    grads.mats[0].add_assign(&upstream.t_matmul(&trace.input)?)?;
                    upstream.matmul(w)
                }
                // out = z·W: dW = zᵀ·g, dz = g·Wᵀ
                Direction::BtoA => {
                    grads.mats[0].add_assign(&trace.input.t_matmul(upstream)?)?;
                    upstream.matmul_t(w)
                }
            };
        }
        let (i1, i2) = self.layer_indices(trace.dir);
        match &trace.hidden {
            Some((pre, act)) => {
                grads.mats[i2].add_assign(&act.t_matmul(upstream)?)?;
                let mut d_hidden = upstream.matmul_t(&self.mats[i2])?;
                for ((g, &x), &y) in d_hidden
                    .data_mut()
                    .iter_mut()
                    .zip(pre.data())
                    .zip(act.data())
                {
                    *g *= self.activation.derivative(x, y);
                }
                grads.mats[i1].add_assign(&trace.input.t_matmul(&d_hidden)?)?;
                d_hidden.matmul_t(&self.mats[i1])
            }
            None => {
                grads.mats[i1].add_assign(&trace.input.t_matmul(upstream)?)?;
                upstream.matmul_t(&self.mats[i1])
            }
        }
    }

    /// Cycle penalty on a paired latent batch; `None` for unconstrained kinds.
    pub fn penalty(
        &self,
        z_a: &Matrix,
        z_b: &Matrix,
        norm: PenaltyNorm,
    ) -> Result<Option<PenaltyTrace>> {
        if z_a.shape() != z_b.shape() {
            return Err(shape_err(format!(
                "penalty batches differ: {:?} vs {:?}",
                z_a.shape(),
                z_b.shape()
            )));
        }
        self.check_input(z_a)?;
        if !self.kind.is_constrained() {
            return Ok(None);
        }
        let batch = z_a.rows().max(1) as f64;
        let mut value = 0.0;
        let mut cycles = Vec::with_capacity(2);
        let mut residuals = Vec::with_capacity(2);
        for (z, first) in [(z_a, Direction::AtoB), (z_b, Direction::BtoA)] {
            let t1 = self.apply(z, first)?;
            let t2 = self.apply(t1.output(), first.reverse())?;
            let r = z.sub(t2.output())?;
            value += (0..r.rows()).map(|i| row_norm(r.row(i), norm)).sum::<f64>() / batch;
            cycles.push((t1, t2));
            residuals.push(r);
        }
        let rb = residuals.pop().unwrap();
        let ra = residuals.pop().unwrap();
        let cb = cycles.pop().unwrap();
        let ca = cycles.pop().unwrap();
        Ok(Some(PenaltyTrace {
            cycles: [ca, cb],
            residuals: [ra, rb],
            norm,
            value,
        }))
    }

    /// Penalty value alone; 0 for unconstrained kinds.
    pub fn penalty_value(&self, z_a: &Matrix, z_b: &Matrix, norm: PenaltyNorm) -> Result<f64> {
        Ok(self.penalty(z_a, z_b, norm)?.map_or(0.0, |t| t.value))
    }

    /// Backpropagates `weight · penalty`. Parameter gradients accumulate into
    /// `grads`; returns `(∂/∂z_a, ∂/∂z_b)`.
    pub fn penalty_backward(
        &self,
        trace: &PenaltyTrace,
        weight: f32,
        grads: &mut TransformSpec,
    ) -> Result<(Matrix, Matrix)> {
        let mut out = Vec::with_capacity(2);
        for ((t1, t2), r) in trace.cycles.iter().zip(&trace.residuals) {
            let batch = r.rows().max(1) as f32;
            let mut g = Matrix::zeros(r.rows(), r.cols());
            for i in 0..r.rows() {
                row_norm_grad(r.row(i), trace.norm, weight / batch, g.row_mut(i));
            }
            // r = z − cycle(z): the cycle sees −g.
            let mut neg = g.clone();
            neg.scale(-1.0);
            let d_mid = self.backward(t2, &neg, grads)?;
            let d_in = self.backward(t1, &d_mid, grads)?;
            g.add_assign(&d_in)?;
            out.push(g);
        }
        let db = out.pop().unwrap();
        let da = out.pop().unwrap();
        Ok((da, db))
    }

    /// `Σ|WᵀW − I| / d²` for trans5, `None` otherwise.
    pub fn orthogonality_error(&self) -> Option<f64> {
        if self.kind != TransformKind::Trans5 {
            return None;
        }
        let w = &self.mats[0];
        let d = w.rows();
        let wtw = w.t_matmul(w).ok()?;
        let mut total = 0.0f64;
        for i in 0..d {
            for j in 0..d {
                let target = if i == j { 1.0 } else { 0.0 };
                total += (wtw.get(i, j) as f64 - target).abs();
            }
        }
        Some(total / (d * d) as f64)
    }

    /// Replaces trans5's `W` with the orthogonal factor of its QR
    /// decomposition (modified Gram–Schmidt on columns, positive diagonal R).
    /// No-op for other kinds.
    pub fn reorthogonalize(&mut self) {
        if self.kind != TransformKind::Trans5 {
            return;
        }
        orthonormalize(&mut self.mats[0]);
    }
}

impl Parameters for TransformSpec {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &[f32])) {
        for (name, m) in self.kind.tensor_names().iter().zip(&self.mats) {
            f(&format!("{prefix}.{name}"), m.data());
        }
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut [f32])) {
        for (name, m) in self.kind.tensor_names().iter().zip(self.mats.iter_mut()) {
            f(&format!("{prefix}.{name}"), m.data_mut());
        }
    }
}

/// Replaces the columns of a square matrix with their Gram–Schmidt
/// orthonormalization (the Q factor of a QR decomposition with positive
/// diagonal R).
pub fn orthonormalize(w: &mut Matrix) {
    let d = w.rows();
    let mut cols: Vec<Vec<f64>> = (0..d)
        .map(|j| (0..d).map(|i| w.get(i, j) as f64).collect())
        .collect();
    for j in 0..d {
        let (done, rest) = cols.split_at_mut(j);
        for prev in done.iter() {
            let proj: f64 = rest[0].iter().zip(prev).map(|(a, b)| a * b).sum();
            for (v, p) in rest[0].iter_mut().zip(prev) {
                *v -= proj * p;
            }
        }
        let norm = cols[j].iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 1e-12 {
            cols[j].iter_mut().for_each(|v| *v /= norm);
        } else {
            // Rank-deficient column: fall back to the unit vector that is
            // most orthogonal to what we already have.
            let mut best = vec![0.0; d];
            let mut best_norm = -1.0;
            for e in 0..d {
                let mut cand = vec![0.0; d];
                cand[e] = 1.0;
                for prev in cols.iter().take(j) {
                    let proj = prev[e];
                    for i in 0..d {
                        cand[i] -= proj * prev[i];
                    }
                }
                let n = cand.iter().map(|v| v * v).sum::<f64>().sqrt();
                if n > best_norm {
                    best_norm = n;
                    best = cand.into_iter().map(|v| v / n).collect();
                }
            }
            cols[j] = best;
        }
    }
    for (j, col) in cols.iter().enumerate() {
        for (i, &v) in col.iter().enumerate() {
            w.set(i, j, v as f32);
        }
    }
}

fn row_norm(r: &[f32], norm: PenaltyNorm) -> f64 {
    match norm {
        PenaltyNorm::L1 => r.iter().map(|&v| (v as f64).abs()).sum(),
        PenaltyNorm::Frobenius => r
            .iter()
            .map(|&v| (v as f64) * (v as f64))
            .sum::<f64>()
            .sqrt(),
    }
}

fn row_norm_grad(r: &[f32], norm: PenaltyNorm, scale: f32, out: &mut [f32]) {
    match norm {
        PenaltyNorm::L1 => {
            for (o, &v) in out.iter_mut().zip(r) {
                *o = if v > 0.0 {
                    scale
                } else if v < 0.0 {
                    -scale
                } else {
                    0.0
                };
            }
        }
        PenaltyNorm::Frobenius => {
            let n = row_norm(r, norm);
            if n > 0.0 {
                let s = (scale as f64 / n) as f32;
                for (o, &v) in out.iter_mut().zip(r) {
                    *o = v * s;
                }
            }
        }
    }
}
