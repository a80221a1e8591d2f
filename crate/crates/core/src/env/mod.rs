//! Multi-agent pseudo-environments sharing one convection simulation.

mod actions;
mod encoding;
mod episode;

#[cfg(test)]
mod tests;

use serde::{Deserialize, Serialize};

pub use crate::solver::GlobalObservation;
pub use actions::{post_clamp_mean, process_actions, process_actions_detailed, reward, ActionPipeline, RewardParams};
pub use encoding::{inject_positional_encoding, pe_value, positional_encoding_field, recenter, recenter_shift};
pub use episode::{AgentView, MarlEnv, StepOutcome};

use crate::solver::SolverError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EnvError {
    #[error("invalid environment configuration: {0}")]
    Config(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("episode is not active: {0}")]
    Inactive(String),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

/// Functional form of the positional encoding added to the temperature channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PeForm {
    /// `sin(2 pi x / Lx)`: zero at both ends and periodic.
    #[default]
    Periodic,
    /// `sin(x / (2 pi))` as printed in the original formula.
    Literal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvConfig {
    pub n_segments: usize,
    pub actions_per_episode: usize,
    /// Time each action is held, in free-fall units.
    pub action_duration: f64,
    pub beta: f64,
    pub reward_scale: f64,
    /// Reward offset `n`; when absent the baseline Nusselt number is used.
    pub reward_offset: Option<f64>,
    pub clamp_limit: f64,
    pub pe_enabled: bool,
    pub pe_amplitude: f64,
    pub pe_form: PeForm,
    /// Probe columns; 32 by default, 30 aligns three columns per segment.
    pub probe_columns: usize,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            n_segments: 10,
            actions_per_episode: 200,
            action_duration: 1.5,
            beta: 0.0015,
            reward_scale: 1.0,
            reward_offset: None,
            clamp_limit: 0.75,
            pe_enabled: false,
            pe_amplitude: 1.0,
            pe_form: PeForm::Periodic,
            probe_columns: 32,
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<(), EnvError> {
        let bad = |m: String| Err(EnvError::Config(m));
        if self.n_segments == 0 {
            return bad("n_segments must be at least 1".into());
        }
        if self.actions_per_episode == 0 {
            return bad("actions_per_episode must be at least 1".into());
        }
        if !(self.action_duration > 0.0 && self.action_duration.is_finite()) {
            return bad(format!("action_duration must be positive, got {}", self.action_duration));
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return bad(format!("beta must lie in [0, 1], got {}", self.beta));
        }
        if !(self.clamp_limit > 0.0 && self.clamp_limit.is_finite()) {
            return bad(format!("clamp_limit must be positive, got {}", self.clamp_limit));
        }
        if !self.reward_scale.is_finite() || self.reward_offset.is_some_and(|n| !n.is_finite()) {
            return bad("reward scale and offset must be finite".into());
        }
        if !self.pe_amplitude.is_finite() {
            return bad("pe_amplitude must be finite".into());
        }
        if self.probe_columns < 3 {
            return bad(format!("probe_columns must be at least 3, got {}", self.probe_columns));
        }
        Ok(())
    }

    /// Reward coefficients with the offset defaulting to `nu_base`.
    pub fn reward_params(&self, nu_base: f64) -> RewardParams {
        RewardParams { scale: self.reward_scale, offset: self.reward_offset.unwrap_or(nu_base), beta: self.beta }
    }
}
