//! Deterministic dense/sparse kernel: matrices, two-layer MLPs with exact
//! gradients, losses, Adam, and the seeded RNG.

pub mod loss;
pub mod matrix;
pub mod mlp;
pub mod optim;
pub mod rng;

pub use loss::{bce_with_logits, bce_with_logits_const, frobenius_norm, l1_norm};
pub use matrix::{Matrix, SparseRow};
pub use mlp::{
    sigmoid, xavier_init, ForwardMode, Mlp2Input, Mlp2Params, Mlp2Trace, OutputActivation,
};
pub use optim::{adam_update, AdamConfig, AdamState, Parameters};
pub use rng::Rng;
