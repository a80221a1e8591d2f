//! PPO-Clip on the shared multi-agent policy: rollouts, advantages, updates
//! and the training loop.

mod buffer;
mod loss;
mod rollout;
mod train;
mod update;


use serde::{Deserialize, Serialize};

pub use buffer::{compute_gae, EpisodeSummary, RolloutBuffer, Transition};
pub use loss::{clipped_surrogate, clipped_surrogate_sum, surrogate_objective, value_loss};
pub use rollout::collect_rollout;
pub use train::{moving_average, train, EpisodeRecord, TrainLogWriter, Trainer, TRAINING_CSV_HEADER};
pub use update::{update, UpdateReport};

use crate::env::EnvError;
use crate::grad::GradError;
use crate::nets::NetError;

#[derive(Debug, thiserror::Error)]
pub enum PpoError {
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Grad(#[from] GradError),
    #[error("invalid PPO settings: {0}")]
    Config(String),
    #[error("usage error: {0}")]
    Usage(String),
    #[error("non-finite value at sample {index}: {message}")]
    Numerical { index: usize, message: String },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("checkpoint error: {0}")]
    Checkpoint(#[from] crate::nets::CheckpointError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PpoHyper {
    pub clip_epsilon: f64,
    pub gamma: f64,
    pub gae_lambda: f64,
    pub learning_rate: f64,
    pub update_epochs: usize,
    pub minibatch_size: usize,
    pub episodes_per_update: usize,
    /// Stop the epoch loop once a minibatch's approximate KL exceeds this.
    /// Written as `false` in configuration files when disabled.
    #[serde(with = "kl_limit")]
    pub target_kl: Option<f64>,
    pub entropy_coef: f64,
}

mod kl_limit {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Limit {
        Value(f64),
        Switch(bool),
    }

    pub fn serialize<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(x) => Limit::Value(*x),
            None => Limit::Switch(false),
        }
        .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
        match Limit::deserialize(d)? {
            Limit::Value(x) => Ok(Some(x)),
            Limit::Switch(false) => Ok(None),
            Limit::Switch(true) => Err(serde::de::Error::custom("target_kl takes a number, or false to disable")),
        }
    }
}

impl Default for PpoHyper {
    fn default() -> Self {
        Self {
            clip_epsilon: 0.2,
            gamma: 0.99,
            gae_lambda: 0.95,
            learning_rate: 3e-4,
            update_epochs: 10,
            minibatch_size: 64,
            episodes_per_update: 1,
            target_kl: Some(0.02),
            entropy_coef: 0.0,
        }
    }
}

impl PpoHyper {
    pub fn validate(&self) -> Result<(), PpoError> {
        let bad = |m: &str| Err(PpoError::Config(m.into()));
        if !(self.clip_epsilon > 0.0 && self.clip_epsilon < 1.0) {
            return bad("clip_epsilon must lie in (0, 1)");
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad("gamma must lie in (0, 1]");
        }
        if !(0.0..=1.0).contains(&self.gae_lambda) {
            return bad("gae_lambda must lie in [0, 1]");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if self.update_epochs == 0 || self.minibatch_size == 0 || self.episodes_per_update == 0 {
            return bad("update_epochs, minibatch_size and episodes_per_update must be at least 1");
        }
        if self.target_kl.is_some_and(|k| !(k > 0.0)) {
            return bad("target_kl must be positive when set");
        }
        if !(self.entropy_coef >= 0.0 && self.entropy_coef.is_finite()) {
            return bad("entropy_coef must be non-negative");
        }
        Ok(())
    }
}
