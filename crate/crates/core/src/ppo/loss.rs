use super::PpoError;
use crate::grad::{Tensor, Var};

/// Per-sample clipped objective `min(r A, clip(r, 1 - eps, 1 + eps) A)`.
pub fn surrogate_objective(ratio: f64, advantage: f64, epsilon: f64) -> f64 {
    (ratio * advantage).min(ratio.clamp(1.0 - epsilon, 1.0 + epsilon) * advantage)
}

fn column<'g>(like: Var<'g>, values: &[f64]) -> Result<Var<'g>, PpoError> {
    Ok(like.graph().constant(Tensor::new(&like.shape(), values.to_vec())?))
}

/// Negated sum of clipped objectives over a batch of current log-probabilities.
pub fn clipped_surrogate_sum<'g>(
    log_prob: Var<'g>,
    behavior_log_prob: &[f64],
    advantages: &[f64],
    epsilon: f64,
) -> Result<Var<'g>, PpoError> {
    let n = log_prob.value().len();
    if behavior_log_prob.len() != n || advantages.len() != n {
        return Err(PpoError::Usage(format!(
            "batch of {n} log-probabilities with {} behavior log-probabilities and {} advantages",
            behavior_log_prob.len(),
            advantages.len()
        )));
    }
    let old = column(log_prob, behavior_log_prob)?;
    let ratio = log_prob.sub(old)?.exp();
    if let Some(i) = ratio.value().data().iter().position(|r| !r.is_finite()) {
        return Err(PpoError::Numerical { index: i, message: "probability ratio is not finite".into() });
    }
    let adv = column(log_prob, advantages)?;
    let plain = ratio.mul(adv)?;
    let clipped = ratio.clip(1.0 - epsilon, 1.0 + epsilon).mul(adv)?;
    Ok(plain.min_pairwise(clipped)?.sum().neg())
}

/// Clipped surrogate loss: batch mean, negated for minimization.
pub fn clipped_surrogate<'g>(
    log_prob: Var<'g>,
    behavior_log_prob: &[f64],
    advantages: &[f64],
    epsilon: f64,
) -> Result<Var<'g>, PpoError> {
    let n = behavior_log_prob.len().max(1) as f64;
    Ok(clipped_surrogate_sum(log_prob, behavior_log_prob, advantages, epsilon)?.scale(1.0 / n))
}

/// Mean squared error between value predictions and return targets.
pub fn value_loss<'g>(values: Var<'g>, returns: &[f64]) -> Result<Var<'g>, PpoError> {
    let targets = column(values, returns)?;
    Ok(values.sub(targets)?.square().mean())
}
