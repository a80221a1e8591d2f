use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::PolicyOutput;
use crate::grad::gaussian_logpdf_scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ActMode {
    #[default]
    Stochastic,
    Deterministic,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Action {
    /// Value sent to the environment, inside [-1, 1].
    pub action: f64,
    /// Unclipped Gaussian draw; equals the mean when deterministic.
    pub sample: f64,
    /// Log density of `sample`; absent when deterministic.
    pub log_prob: Option<f64>,
}

pub fn act<R: Rng + ?Sized>(out: &PolicyOutput, mode: ActMode, rng: &mut R) -> Action {
    match mode {
        ActMode::Deterministic => Action { action: out.mean.clamp(-1.0, 1.0), sample: out.mean, log_prob: None },
        ActMode::Stochastic => {
            let z: f64 = rng.sample(StandardNormal);
            let sample = out.mean + out.std() * z;
            Action {
                action: sample.clamp(-1.0, 1.0),
                sample,
                log_prob: Some(gaussian_logpdf_scalar(sample, out.mean, out.log_std)),
            }
        }
    }
}
