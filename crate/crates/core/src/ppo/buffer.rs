use super::{PpoError, PpoHyper};
use crate::solver::GlobalObservation;

/// One agent's experience at one environment step.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub agent: usize,
    pub step: usize,
    /// Recentered (and encoded, if enabled) view the action was taken on.
    pub observation: GlobalObservation,
    /// Action sent to the environment.
    pub action: f64,
    /// Unclipped Gaussian draw the log-probability refers to.
    pub sample: f64,
    pub log_prob: f64,
    pub reward: f64,
    pub value: f64,
    pub advantage: f64,
    pub ret: f64,
}

/// Bookkeeping for one episode inside a buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeSummary {
    /// Index of the first transition; layout is step-major, agent-minor.
    pub start: usize,
    pub steps: usize,
    /// Value estimate after the last recorded step, per agent; zero when cut short by a blow-up.
    pub bootstrap: Vec<f64>,
    pub blow_up: bool,
    pub mean_nu: f64,
    pub final_nu: f64,
    pub mean_reward: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RolloutBuffer {
    pub agents: usize,
    pub transitions: Vec<Transition>,
    pub episodes: Vec<EpisodeSummary>,
}

impl RolloutBuffer {
    pub fn new(agents: usize) -> Self {
        Self { agents, transitions: Vec::new(), episodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }
}

/// Generalized advantage estimates per (episode, agent) stream; returns are
/// advantages plus values. Normalization happens later, per update batch.
pub fn compute_gae(buffer: &mut RolloutBuffer, hyper: &PpoHyper) -> Result<(), PpoError> {
    if buffer.is_empty() {
        return Err(PpoError::Usage("cannot estimate advantages on an empty buffer".into()));
    }
    let n = buffer.agents;
    for ep in &buffer.episodes {
        if ep.bootstrap.len() != n || ep.start + ep.steps * n > buffer.transitions.len() {
            return Err(PpoError::Usage("episode bookkeeping does not match the transitions".into()));
        }
        for agent in 0..n {
            let mut next_value = ep.bootstrap[agent];
            let mut running = 0.0;
            for step in (0..ep.steps).rev() {
                let t = &mut buffer.transitions[ep.start + step * n + agent];
                let delta = t.reward + hyper.gamma * next_value - t.value;
                running = delta + hyper.gamma * hyper.gae_lambda * running;
                t.advantage = running;
                t.ret = running + t.value;
                next_value = t.value;
            }
        }
    }
    Ok(())
}

/// Zero-mean, unit-variance copy; an all-constant input maps to zeros.
pub(crate) fn normalized(values: &[f64]) -> Vec<f64> {
    let n = values.len().max(1) as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let std = var.sqrt();
    values.iter().map(|v| (v - mean) / (std + 1e-8)).collect()
}
