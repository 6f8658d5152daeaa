//! Two-layer perceptron blocks: `act2(relu(x·W1 + b1) ⊙ mask · W2 + b2)`.
//!
//! Every network in the model (encoders, decoders, discriminators, the
//! probe classifier) is one of these. Dropout sits on the hidden layer and
//! uses inverted scaling, so evaluation mode needs no rescale.

use crate::error::{shape_err, Result};
use crate::numerics::matrix::{axpy, gemm_acc, gemm_nt, gemm_tn_acc, Matrix, SparseRow};
use crate::numerics::optim::Parameters;
use crate::numerics::rng::Rng;

/// Activation applied to the second layer's output.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OutputActivation {
    Identity,
    Sigmoid,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mlp2Params {
    pub w1: Matrix,
    pub b1: Vec<f32>,
    pub w2: Matrix,
    pub b2: Vec<f32>,
}

/// Input batch for [`Mlp2Params::forward`].
#[derive(Clone, Copy, Debug)]
pub enum Mlp2Input<'a> {
    Dense(&'a Matrix),
    Sparse(&'a [&'a SparseRow]),
}

impl Mlp2Input<'_> {
    pub fn batch_len(&self) -> usize {
        match self {
            Mlp2Input::Dense(m) => m.rows(),
            Mlp2Input::Sparse(rows) => rows.len(),
        }
    }
}

#[derive(Clone, Debug)]
enum TraceInput {
    Dense(Matrix),
    Sparse(Vec<SparseRow>),
}

/// Activations retained from a forward pass for the matching backward pass.
#[derive(Clone, Debug)]
pub struct Mlp2Trace {
    input: TraceInput,
    /// Hidden activations after relu and dropout.
    hidden: Matrix,
    /// ∂hidden/∂pre-activation: 0 where relu is off or the unit was dropped,
    /// else the inverted-dropout scale.
    hidden_gate: Matrix,
    output: Matrix,
    activation: OutputActivation,
}

impl Mlp2Trace {
    pub fn output(&self) -> &Matrix {
        &self.output
    }

    pub fn hidden(&self) -> &Matrix {
        &self.hidden
    }

    pub fn batch_len(&self) -> usize {
        self.output.rows()
    }
}

/// Forward-pass options.
#[derive(Clone, Copy, Debug)]
pub struct ForwardMode {
    pub dropout: f32,
    pub training: bool,
    pub activation: OutputActivation,
}

impl ForwardMode {
    pub fn eval(activation: OutputActivation) -> Self {
        ForwardMode {
            dropout: 0.0,
            training: false,
            activation,
        }
    }

    pub fn train(dropout: f32, activation: OutputActivation) -> Self {
        ForwardMode {
            dropout,
            training: true,
            activation,
        }
    }
}

/// Glorot-uniform matrix: entries from `U[-a, a]`, `a = sqrt(6 / (rows + cols))`.
pub fn xavier_init(rows: usize, cols: usize, rng: &mut Rng) -> Result<Matrix> {
    if rows == 0 || cols == 0 {
        return Err(shape_err(format!(
            "xavier_init needs nonzero dims, got {rows}x{cols}"
        )));
    }
    let a = (6.0f64 / (rows + cols) as f64).sqrt() as f32;
    let data = (0..rows * cols).map(|_| rng.uniform_range(-a, a)).collect();
    Matrix::from_vec(rows, cols, data)
}

impl Mlp2Params {
    /// Xavier weights, zero biases.
    pub fn xavier(input: usize, hidden: usize, output: usize, rng: &mut Rng) -> Result<Self> {
        Ok(Mlp2Params {
            w1: xavier_init(input, hidden, rng)?,
            b1: vec![0.0; hidden],
            w2: xavier_init(hidden, output, rng)?,
            b2: vec![0.0; output],
        })
    }

    pub fn zeros(input: usize, hidden: usize, output: usize) -> Self {
        Mlp2Params {
            w1: Matrix::zeros(input, hidden),
            b1: vec![0.0; hidden],
            w2: Matrix::zeros(hidden, output),
            b2: vec![0.0; output],
        }
    }

    pub fn zeros_like(&self) -> Self {
        Mlp2Params::zeros(self.input_dim(), self.hidden_dim(), self.output_dim())
    }

    pub fn input_dim(&self) -> usize {
        self.w1.rows()
    }

    pub fn hidden_dim(&self) -> usize {
        self.w1.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.w2.cols()
    }

    pub fn validate(&self) -> Result<()> {
        if self.b1.len() != self.w1.cols()
            || self.w2.rows() != self.w1.cols()
            || self.b2.len() != self.w2.cols()
        {
            return Err(shape_err(format!(
                "inconsistent mlp shapes: w1 {:?}, b1 {}, w2 {:?}, b2 {}",
                self.w1.shape(),
                self.b1.len(),
                self.w2.shape(),
                self.b2.len()
            )));
        }
        Ok(())
    }

    pub fn forward(
        &self,
        input: Mlp2Input<'_>,
        mode: ForwardMode,
        rng: &mut Rng,
    ) -> Result<Mlp2Trace> {
        if !(0.0..1.0).contains(&mode.dropout) {
            return Err(shape_err(format!(
                "dropout {} outside [0, 1)",
                mode.dropout
            )));
        }
        let batch = input.batch_len();
        let hid = self.hidden_dim();
        let inp = self.input_dim();

        let mut pre = Matrix::zeros(batch, hid);
        let trace_input = match input {
            Mlp2Input::Dense(x) => {
                if x.cols() != inp {
                    return Err(shape_err(format!(
                        "input width {} does not match w1 rows {inp}",
                        x.cols()
                    )));
                }
                gemm_acc(x.data(), batch, inp, self.w1.data(), hid, pre.data_mut());
                TraceInput::Dense(x.clone())
            }
            Mlp2Input::Sparse(rows) => {
                for (b, row) in rows.iter().enumerate() {
                    if row.dim() != inp {
                        return Err(shape_err(format!(
                            "sparse row dim {} does not match w1 rows {inp}",
                            row.dim()
                        )));
                    }
                    let out = pre.row_mut(b);
                    for (&j, &v) in row.indices().iter().zip(row.values()) {
                        axpy(v, self.w1.row(j as usize), out);
                    }
                }
                TraceInput::Sparse(rows.iter().map(|r| (*r).clone()).collect())
            }
        };

        let keep_scale = if mode.training && mode.dropout > 0.0 {
            1.0 / (1.0 - mode.dropout)
        } else {
            1.0
        };
        let mut hidden = pre;
        let mut gate = Matrix::zeros(batch, hid);
        for b in 0..batch {
            let h = hidden.row_mut(b);
            let g = gate.row_mut(b);
            for j in 0..hid {
                let z = h[j] + self.b1[j];
                let dropped = mode.training && mode.dropout > 0.0 && rng.uniform() < mode.dropout;
                if z > 0.0 && !dropped {
                    h[j] = z * keep_scale;
                    g[j] = keep_scale;
                } else {
                    h[j] = 0.0;
                    g[j] = 0.0;
                }
            }
        }

        let out_dim = self.output_dim();
        let mut output = Matrix::zeros(batch, out_dim);
        for b in 0..batch {
            output.row_mut(b).copy_from_slice(&self.b2);
        }
        gemm_acc(
            hidden.data(),
            batch,
            hid,
            self.w2.data(),
            out_dim,
            output.data_mut(),
        );
        if mode.activation == OutputActivation::Sigmoid {
            for v in output.data_mut() {
                *v = sigmoid(*v);
            }
        }

        Ok(Mlp2Trace {
            input: trace_input,
            hidden,
            hidden_gate: gate,
            output,
            activation: mode.activation,
        })
    }

    /// Accumulates parameter gradients into `grads` and returns the gradient
    /// with respect to the input when it was dense and `want_input` is set.
    ///
    /// `upstream` is ∂L/∂output (post-activation).
    pub fn backward_into(
        &self,
        trace: &Mlp2Trace,
        upstream: &Matrix,
        grads: &mut Mlp2Params,
        want_input: bool,
    ) -> Result<Option<Matrix>> {
        if upstream.shape() != trace.output.shape() {
            return Err(shape_err(format!(
                "upstream gradient {:?} does not match output {:?}",
                upstream.shape(),
                trace.output.shape()
            )));
        }
        if grads.w1.shape() != self.w1.shape() || grads.w2.shape() != self.w2.shape() {
            return Err(shape_err("gradient buffer does not match parameters"));
        }
        let batch = trace.batch_len();
        let hid = self.hidden_dim();
        let out_dim = self.output_dim();
        let inp = self.input_dim();

        let mut d_logit = upstream.clone();
        if trace.activation == OutputActivation::Sigmoid {
            for (g, &y) in d_logit.data_mut().iter_mut().zip(trace.output.data()) {
                *g *= y * (1.0 - y);
            }
        }

        for b in 0..batch {
            for (acc, &g) in grads.b2.iter_mut().zip(d_logit.row(b)) {
                *acc += g;
            }
        }
        gemm_tn_acc(
            trace.hidden.data(),
            batch,
            hid,
            d_logit.data(),
            out_dim,
            grads.w2.data_mut(),
        );

        let mut d_pre = Matrix::zeros(batch, hid);
        gemm_nt(
            d_logit.data(),
            batch,
            out_dim,
            self.w2.data(),
            hid,
            d_pre.data_mut(),
        );
        for (d, &g) in d_pre.data_mut().iter_mut().zip(trace.hidden_gate.data()) {
            *d *= g;
        }
        for b in 0..batch {
            for (acc, &g) in grads.b1.iter_mut().zip(d_pre.row(b)) {
                *acc += g;
            }
        }

        match &trace.input {
            TraceInput::Dense(x) => {
                gemm_tn_acc(x.data(), batch, inp, d_pre.data(), hid, grads.w1.data_mut());
                if want_input {
                    let mut dx = Matrix::zeros(batch, inp);
                    gemm_nt(d_pre.data(), batch, hid, self.w1.data(), inp, dx.data_mut());
                    return Ok(Some(dx));
                }
            }
            TraceInput::Sparse(rows) => {
                for (b, row) in rows.iter().enumerate() {
                    let g = d_pre.row(b);
                    for (&j, &v) in row.indices().iter().zip(row.values()) {
                        let j = j as usize;
                        axpy(v, g, &mut grads.w1.data_mut()[j * hid..(j + 1) * hid]);
                    }
                }
                if want_input {
                    let mut dx = Matrix::zeros(batch, inp);
                    gemm_nt(d_pre.data(), batch, hid, self.w1.data(), inp, dx.data_mut());
                    return Ok(Some(dx));
                }
            }
        }
        Ok(None)
    }

    /// Fresh gradients plus the input gradient.
    pub fn backward(&self, trace: &Mlp2Trace, upstream: &Matrix) -> Result<(Mlp2Params, Matrix)> {
        let mut grads = self.zeros_like();
        let dx = self
            .backward_into(trace, upstream, &mut grads, true)?
            .expect("input gradient requested");
        Ok((grads, dx))
    }
}

impl Parameters for Mlp2Params {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &[f32])) {
        f(&format!("{prefix}.w1"), self.w1.data());
        f(&format!("{prefix}.b1"), &self.b1);
        f(&format!("{prefix}.w2"), self.w2.data());
        f(&format!("{prefix}.b2"), &self.b2);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut [f32])) {
        f(&format!("{prefix}.w1"), self.w1.data_mut());
        f(&format!("{prefix}.b1"), &mut self.b1);
        f(&format!("{prefix}.w2"), self.w2.data_mut());
        f(&format!("{prefix}.b2"), &mut self.b2);
    }
}

#[inline]
pub fn sigmoid(x: f32) -> f32 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
