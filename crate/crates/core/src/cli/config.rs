//! Flat `key = value` run configuration.
//!
//! Blank lines and lines starting with `#` are ignored. Unknown and repeated
//! keys are errors. Lists are comma separated.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::analysis::{ProbeOptions, DEFAULT_SIGMAS};
use crate::error::{Error, Result};
use crate::training::TrainConfig;

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub train: TrainConfig,
    /// Prepared dataset directory.
    pub dataset: Option<PathBuf>,
    /// Run directory for outputs.
    pub out: Option<PathBuf>,
    /// Fraction of each user's training interactions to keep.
    pub train_ratio: f64,
    pub probe_runs: usize,
    pub probe: ProbeOptions,
    pub mmd_sigmas: Vec<f64>,
    /// Users used for MMD (the estimator is quadratic).
    pub mmd_max_users: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            train: TrainConfig::default(),
            dataset: None,
            out: None,
            train_ratio: 1.0,
            probe_runs: 10,
            probe: ProbeOptions::default(),
            mmd_sigmas: DEFAULT_SIGMAS.to_vec(),
            mmd_max_users: 2000,
        }
    }
}

/// Every key with a one-line description, in file order.
pub const KEYS: &[(&str, &str)] = &[
    ("dataset", "prepared dataset directory"),
    ("out", "run directory"),
    (
        "train_ratio",
        "fraction of training interactions kept per user, in (0, 1]",
    ),
    ("latent", "latent dimension d"),
    ("hidden", "hidden width of encoders and decoders"),
    ("disc_hidden", "hidden width of discriminators"),
    ("lr", "Adam learning rate"),
    ("batch", "users per batch"),
    ("epochs", "training epochs"),
    ("dropout", "hidden dropout of encoders and discriminators"),
    ("lambda", "transformation penalty weight"),
    ("eta", "prior regularization weight"),
    ("prior", "gaussian | laplace | uniform | mvgaussian"),
    ("transform", "trans1 | trans2 | trans3 | trans4 | trans5"),
    ("transform_activation", "relu | tanh (trans2, trans4)"),
    ("penalty_norm", "l1 | frobenius"),
    ("ablation", "full-etl | etl-jrl | aae++"),
    ("seed", "master seed"),
    ("cutoffs", "ranking cutoffs K"),
    ("disc_steps", "discriminator steps per batch"),
    ("eval_interval", "validate every N epochs"),
    (
        "reorthogonalize_every",
        "QR-project W every N batches, 0 = never",
    ),
    (
        "freeze_transform",
        "keep the transformation at its initial value",
    ),
    ("log_timing", "write epoch times to log.csv"),
    ("probe_runs", "pairing-probe repetitions"),
    ("probe_hidden", "probe hidden width"),
    ("probe_epochs", "probe training epochs"),
    ("probe_lr", "probe learning rate"),
    ("probe_batch", "probe batch size"),
    ("mmd_sigmas", "RBF bandwidths"),
    ("mmd_max_users", "users sampled for MMD"),
];

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("`{key}`: cannot parse `{value}`")))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse(key, s))
        .collect()
}

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

fn path_opt(value: &str) -> Option<PathBuf> {
    if value.is_empty() {
        None
    } else {
        Some(PathBuf::from(value))
    }
}

fn path_str(p: &Option<PathBuf>) -> String {
    p.as_ref()
        .map(|p| p.display().to_string())
        .unwrap_or_default()
}

impl RunConfig {
    /// Sets one key from its text form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        let t = &mut self.train;
        match key {
            "dataset" => self.dataset = path_opt(v),
            "out" => self.out = path_opt(v),
            "train_ratio" => self.train_ratio = parse(key, v)?,
            "latent" => t.latent = parse(key, v)?,
            "hidden" => t.hidden = parse(key, v)?,
            "disc_hidden" => t.disc_hidden = parse(key, v)?,
            "lr" => t.lr = parse(key, v)?,
            "batch" => t.batch = parse(key, v)?,
            "epochs" => t.epochs = parse(key, v)?,
            "dropout" => t.dropout = parse(key, v)?,
            "lambda" => t.lambda = parse(key, v)?,
            "eta" => t.eta = parse(key, v)?,
            "prior" => t.prior = v.parse()?,
            "transform" => t.transform = v.parse()?,
            "transform_activation" => t.transform_activation = v.parse()?,
            "penalty_norm" => t.penalty_norm = v.parse()?,
            "ablation" => t.ablation = v.parse()?,
            "seed" => t.seed = parse(key, v)?,
            "cutoffs" => t.cutoffs = parse_list(key, v)?,
            "disc_steps" => t.disc_steps = parse(key, v)?,
            "eval_interval" => t.eval_interval = parse(key, v)?,
            "reorthogonalize_every" => t.reorthogonalize_every = parse(key, v)?,
            "freeze_transform" => t.freeze_transform = parse(key, v)?,
            "log_timing" => t.log_timing = parse(key, v)?,
            "probe_runs" => self.probe_runs = parse(key, v)?,
            "probe_hidden" => self.probe.hidden = parse(key, v)?,
            "probe_epochs" => self.probe.epochs = parse(key, v)?,
            "probe_lr" => self.probe.lr = parse(key, v)?,
            "probe_batch" => self.probe.batch = parse(key, v)?,
            "mmd_sigmas" => self.mmd_sigmas = parse_list(key, v)?,
            "mmd_max_users" => self.mmd_max_users = parse(key, v)?,
            other => return Err(Error::Config(format!("unknown config key `{other}`"))),
        }
        Ok(())
    }

    /// Current value of one key in text form.
    pub fn get(&self, key: &str) -> Result<String> {
        let t = &self.train;
        Ok(match key {
            "dataset" => path_str(&self.dataset),
            "out" => path_str(&self.out),
            "train_ratio" => self.train_ratio.to_string(),
            "latent" => t.latent.to_string(),
            "hidden" => t.hidden.to_string(),
            "disc_hidden" => t.disc_hidden.to_string(),
            "lr" => t.lr.to_string(),
            "batch" => t.batch.to_string(),
            "epochs" => t.epochs.to_string(),
            "dropout" => t.dropout.to_string(),
            "lambda" => t.lambda.to_string(),
            "eta" => t.eta.to_string(),
            "prior" => t.prior.name().to_string(),
            "transform" => t.transform.name().to_string(),
            "transform_activation" => t.transform_activation.name().to_string(),
            "penalty_norm" => t.penalty_norm.name().to_string(),
            "ablation" => t.ablation.name().to_string(),
            "seed" => t.seed.to_string(),
            "cutoffs" => join(&t.cutoffs),
            "disc_steps" => t.disc_steps.to_string(),
            "eval_interval" => t.eval_interval.to_string(),
            "reorthogonalize_every" => t.reorthogonalize_every.to_string(),
            "freeze_transform" => t.freeze_transform.to_string(),
            "log_timing" => t.log_timing.to_string(),
            "probe_runs" => self.probe_runs.to_string(),
            "probe_hidden" => self.probe.hidden.to_string(),
            "probe_epochs" => self.probe.epochs.to_string(),
            "probe_lr" => self.probe.lr.to_string(),
            "probe_batch" => self.probe.batch.to_string(),
            "mmd_sigmas" => join(&self.mmd_sigmas),
            "mmd_max_users" => self.mmd_max_users.to_string(),
            other => return Err(Error::Config(format!("unknown config key `{other}`"))),
        })
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        let mut seen = std::collections::HashSet::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", n + 1)))?;
            let k = k.trim();
            if !seen.insert(k.to_string()) {
                return Err(Error::Config(format!("line {}: `{k}` set twice", n + 1)));
            }
            cfg.set(k, v)?;
        }
        Ok(cfg)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, _) in KEYS {
            let v = self.get(k).expect("every listed key is known");
            s.push_str(&format!("{k} = {v}\n"));
        }
        s
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Applies `key=value` overrides in order.
    pub fn apply_overrides(&mut self, overrides: &[String]) -> Result<()> {
        for o in overrides {
            let (k, v) = o
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override `{o}` is not key=value")))?;
            self.set(k.trim(), v)?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        if !(self.train_ratio > 0.0 && self.train_ratio <= 1.0) {
            return Err(Error::Config(format!(
                "train_ratio {} outside (0, 1]",
                self.train_ratio
            )));
        }
        if self.mmd_sigmas.is_empty() || self.mmd_sigmas.iter().any(|&s| s.is_nan() || s <= 0.0) {
            return Err(Error::Config("mmd_sigmas must be positive".into()));
        }
        Ok(())
    }
}
