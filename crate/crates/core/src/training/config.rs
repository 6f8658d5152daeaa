use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::model::{ModelSpec, PenaltyNorm, PriorKind, TransformActivation, TransformKind};

/// Which parts of the objective are active.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Ablation {
    /// Joint reconstruction with cross terms and penalty, plus the
    /// adversarial prior regularizer.
    FullEtl,
    /// Joint reconstruction only; discriminators are never trained.
    EtlJrl,
    /// Two independent adversarial auto-encoders: no cross generation and
    /// no transformation penalty.
    AaePlusPlus,
}

impl Ablation {
    pub const ALL: [Ablation; 3] = [Ablation::FullEtl, Ablation::EtlJrl, Ablation::AaePlusPlus];

    pub fn name(self) -> &'static str {
        match self {
            Ablation::FullEtl => "full-etl",
            Ablation::EtlJrl => "etl-jrl",
            Ablation::AaePlusPlus => "aae++",
        }
    }

    pub fn uses_cross_terms(self) -> bool {
        self != Ablation::AaePlusPlus
    }

    pub fn uses_prior(self) -> bool {
        self != Ablation::EtlJrl
    }
}

impl fmt::Display for Ablation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Ablation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ablation::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown ablation `{s}`")))
    }
}

/// Every training hyperparameter and toggle.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub latent: usize,
    pub hidden: usize,
    pub disc_hidden: usize,
    pub lr: f64,
    pub batch: usize,
    pub epochs: usize,
    /// Hidden-layer dropout of encoders and discriminators.
    pub dropout: f32,
    pub lambda: f32,
    pub eta: f32,
    pub prior: PriorKind,
    pub transform: TransformKind,
    pub transform_activation: TransformActivation,
    pub penalty_norm: PenaltyNorm,
    pub ablation: Ablation,
    pub seed: u64,
    pub cutoffs: Vec<usize>,
    pub disc_steps: usize,
    /// Validate every this many epochs (the last epoch is always validated).
    pub eval_interval: usize,
    /// Project trans5's `W` back onto the orthogonal group every this many
    /// batches; 0 disables.
    pub reorthogonalize_every: usize,
    /// Keep the transformation at its initial value.
    pub freeze_transform: bool,
    /// Write measured epoch times to the training log instead of 0.
    pub log_timing: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            latent: 200,
            hidden: 400,
            disc_hidden: 100,
            lr: 1e-3,
            batch: 256,
            epochs: 300,
            dropout: 0.5,
            lambda: 1.0,
            eta: 1.0,
            prior: PriorKind::Gaussian,
            transform: TransformKind::Trans5,
            transform_activation: TransformActivation::Relu,
            penalty_norm: PenaltyNorm::L1,
            ablation: Ablation::FullEtl,
            seed: 0,
            cutoffs: vec![5, 10],
            disc_steps: 1,
            eval_interval: 1,
            reorthogonalize_every: 0,
            freeze_transform: false,
            log_timing: false,
        }
    }
}

/// Penalty weights chosen per dataset pair in the original experiments.
pub fn lambda_for_pair(pair: &str) -> Option<f32> {
    match pair {
        "movie-book" => Some(5.0),
        "movie-music" => Some(0.5),
        "music-book" => Some(1.0),
        _ => None,
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return fail(format!("lambda must be >= 0, got {}", self.lambda));
        }
        if !(self.eta >= 0.0 && self.eta.is_finite()) {
            return fail(format!("eta must be >= 0, got {}", self.eta));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return fail(format!("dropout must be in [0, 1), got {}", self.dropout));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return fail(format!("lr must be > 0, got {}", self.lr));
        }
        for (name, v) in [
            ("batch", self.batch),
            ("latent", self.latent),
            ("hidden", self.hidden),
            ("disc_hidden", self.disc_hidden),
            ("disc_steps", self.disc_steps),
            ("eval_interval", self.eval_interval),
        ] {
            if v == 0 {
                return fail(format!("{name} must be >= 1"));
            }
        }
        if self.cutoffs.is_empty() || self.cutoffs.contains(&0) {
            return fail(format!(
                "cutoffs must be nonempty and positive, got {:?}",
                self.cutoffs
            ));
        }
        Ok(())
    }

    pub fn model_spec(&self, items: [usize; 2]) -> ModelSpec {
        ModelSpec {
            items,
            latent: self.latent,
            hidden: self.hidden,
            disc_hidden: self.disc_hidden,
            transform: self.transform,
            transform_activation: self.transform_activation,
        }
    }
}
