use std::f64::consts::PI;

use super::{EnvConfig, EnvError, GlobalObservation, PeForm};
use crate::solver::PROBE_ROWS;

/// Positional encoding at horizontal position `x`.
pub fn pe_value(x: f64, domain_width: f64, amplitude: f64, form: PeForm) -> f64 {
    match form {
        PeForm::Periodic => amplitude * (2.0 * PI * x / domain_width).sin(),
        PeForm::Literal => amplitude * (x / (2.0 * PI)).sin(),
    }
}

/// Row-constant `8 x W` encoding evaluated at the probe x-stations.
pub fn positional_encoding_field(cfg: &EnvConfig, x_stations: &[f64], domain_width: f64) -> Vec<f64> {
    let row: Vec<f64> = x_stations.iter().map(|&x| pe_value(x, domain_width, cfg.pe_amplitude, cfg.pe_form)).collect();
    (0..PROBE_ROWS).flat_map(|_| row.iter().copied()).collect()
}

/// Add `field` to the temperature channel; velocity channels are untouched.
pub fn inject_positional_encoding(obs: &GlobalObservation, field: &[f64]) -> Result<GlobalObservation, EnvError> {
    if field.len() != PROBE_ROWS * obs.columns {
        return Err(EnvError::Precondition(format!(
            "encoding field has {} values, observation channel has {}",
            field.len(),
            PROBE_ROWS * obs.columns
        )));
    }
    let mut out = obs.clone();
    for (t, p) in out.channel_mut(0).iter_mut().zip(field) {
        *t += p;
    }
    Ok(out)
}

/// Column shift placing the centre of segment `agent` at column `W / 2`,
/// rounding half up: `floor(W (i + 1/2) / N_s - W / 2 + 1/2)`.
pub fn recenter_shift(agent: usize, segments: usize, columns: usize) -> isize {
    let w = columns as f64;
    let centre = w * (agent as f64 + 0.5) / segments as f64;
    (centre - w / 2.0 + 0.5).floor() as isize
}

/// Circular column permutation with `out[c] = obs[(c + shift_i) mod W]`.
pub fn recenter(obs: &GlobalObservation, agent: usize, segments: usize) -> Result<GlobalObservation, EnvError> {
    if agent >= segments {
        return Err(EnvError::Precondition(format!("agent {agent} out of range for {segments} segments")));
    }
    Ok(obs.rolled(recenter_shift(agent, segments, obs.columns)))
}
