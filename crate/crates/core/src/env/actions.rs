use super::{EnvConfig, EnvError};

/// Intermediate and final stages of the action pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionPipeline {
    /// Raw actions minus their mean.
    pub centered: Vec<f64>,
    /// Centered actions clamped to the configured limit.
    pub offsets: Vec<f64>,
}

/// Subtract the mean of the raw actions, then clamp each to `clamp_limit`.
pub fn process_actions_detailed(raw: &[f64], cfg: &EnvConfig) -> Result<ActionPipeline, EnvError> {
    if raw.len() != cfg.n_segments {
        return Err(EnvError::Precondition(format!(
            "expected {} raw actions, got {}",
            cfg.n_segments,
            raw.len()
        )));
    }
    if let Some((i, a)) = raw.iter().enumerate().find(|(_, a)| !(-1.0..=1.0).contains(*a)) {
        return Err(EnvError::Precondition(format!("raw action {i} = {a} lies outside [-1, 1]")));
    }
    // Summing offsets from the first entry makes identical inputs centre to exactly zero.
    let first = raw[0];
    let mean = first + raw.iter().map(|a| a - first).sum::<f64>() / raw.len() as f64;
    let centered: Vec<f64> = raw.iter().map(|a| a - mean).collect();
    let limit = cfg.clamp_limit;
    let offsets = centered.iter().map(|a| a.clamp(-limit, limit)).collect();
    Ok(ActionPipeline { centered, offsets })
}

pub fn process_actions(raw: &[f64], cfg: &EnvConfig) -> Result<Vec<f64>, EnvError> {
    Ok(process_actions_detailed(raw, cfg)?.offsets)
}

/// Mean of the final offsets; non-zero only when clamping was active.
pub fn post_clamp_mean(offsets: &[f64]) -> f64 {
    offsets.iter().sum::<f64>() / offsets.len().max(1) as f64
}

/// Reward coefficients `m`, `n` and `beta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardParams {
    pub scale: f64,
    pub offset: f64,
    pub beta: f64,
}

/// `m (n - (1 - beta) Nu_global - beta Nu_local)`.
pub fn reward(nu_global: f64, nu_local: f64, p: &RewardParams) -> f64 {
    p.scale * (p.offset - (1.0 - p.beta) * nu_global - p.beta * nu_local)
}
