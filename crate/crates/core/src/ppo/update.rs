use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::buffer::normalized;
use super::{clipped_surrogate_sum, PpoError, PpoHyper, RolloutBuffer};
use crate::grad::{gaussian_logpdf, Adam, Graph, Tensor, Var};
use crate::nets::{actor_forward, batch_tensor, critic_forward, PolicyParams, TrunkKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpdateReport {
    pub policy_loss: f64,
    pub value_loss: f64,
    /// Fraction of samples whose ratio left the clip band, in [0, 1].
    pub clip_fraction: f64,
    pub approx_kl: f64,
    pub epochs: usize,
    pub minibatches: usize,
    pub early_stopped: bool,
    pub samples: usize,
}

struct MinibatchStats {
    policy_loss: f64,
    value_loss: f64,
    clipped: usize,
    kl_sum: f64,
}

fn micro_batch(params: &PolicyParams) -> usize {
    match params.spec.trunk {
        TrunkKind::GiCnn => 8,
        TrunkKind::Fc | TrunkKind::GiNn => 256,
    }
}

fn add_into(acc: &mut [Tensor], grads: Vec<Tensor>) {
    for (a, g) in acc.iter_mut().zip(grads) {
        for (x, y) in a.data_mut().iter_mut().zip(g.data()) {
            *x += y;
        }
    }
}

/// Gradients of the minibatch losses, accumulated over memory-bounded chunks.
fn minibatch_gradients(
    params: &PolicyParams,
    buffer: &RolloutBuffer,
    indices: &[usize],
    advantages: &[f64],
    hyper: &PpoHyper,
) -> Result<(MinibatchStats, Vec<Tensor>, Vec<Tensor>), PpoError> {
    let mut actor_grads: Vec<Tensor> = params.actor.iter().map(|t| Tensor::zeros(t.shape())).collect();
    let mut critic_grads: Vec<Tensor> = params.critic.iter().map(|t| Tensor::zeros(t.shape())).collect();
    let inv = 1.0 / indices.len() as f64;
    let mut stats = MinibatchStats { policy_loss: 0.0, value_loss: 0.0, clipped: 0, kl_sum: 0.0 };
    for chunk in indices.chunks(micro_batch(params)) {
        let obs: Vec<_> = chunk.iter().map(|&i| buffer.transitions[i].observation.clone()).collect();
        let samples: Vec<f64> = chunk.iter().map(|&i| buffer.transitions[i].sample).collect();
        let old: Vec<f64> = chunk.iter().map(|&i| buffer.transitions[i].log_prob).collect();
        let adv: Vec<f64> = chunk.iter().map(|&i| advantages[i]).collect();
        let rets: Vec<f64> = chunk.iter().map(|&i| buffer.transitions[i].ret).collect();
        let b = chunk.len();

        let g = Graph::new();
        let x = g.constant(batch_tensor(&obs)?);
        let actor: Vec<Var> = params.actor.iter().map(|t| g.param(t.clone())).collect();
        let (mean, log_std) = actor_forward(params, &actor, x)?;
        let sample = g.constant(Tensor::new(&[b, 1], samples)?);
        let log_prob = gaussian_logpdf(sample, mean, log_std)?;
        let mut policy = clipped_surrogate_sum(log_prob, &old, &adv, hyper.clip_epsilon)
            .map_err(|e| match e {
                PpoError::Numerical { index, message } => PpoError::Numerical { index: chunk[index], message },
                other => other,
            })?
            .scale(inv);
        if hyper.entropy_coef > 0.0 {
            policy = policy.sub(log_std.sum().scale(hyper.entropy_coef * inv))?;
        }
        let lp = log_prob.value();
        for (k, (&new, &o)) in lp.data().iter().zip(&old).enumerate() {
            let r = (new - o).exp();
            if (r - 1.0).abs() > hyper.clip_epsilon {
                stats.clipped += 1;
            }
            if !r.is_finite() {
                return Err(PpoError::Numerical { index: chunk[k], message: "probability ratio is not finite".into() });
            }
            stats.kl_sum += (r - 1.0) - (new - o);
        }
        stats.policy_loss += policy.item();
        g.backward(policy)?;
        add_into(&mut actor_grads, actor.iter().map(|v| g.grad_or_zeros(*v)).collect());

        let g = Graph::new();
        let x = g.constant(batch_tensor(&obs)?);
        let critic: Vec<Var> = params.critic.iter().map(|t| g.param(t.clone())).collect();
        let values = critic_forward(params, &critic, x)?;
        let targets = g.constant(Tensor::new(&[b, 1], rets)?);
        let loss = values.sub(targets)?.square().sum().scale(inv);
        stats.value_loss += loss.item();
        g.backward(loss)?;
        add_into(&mut critic_grads, critic.iter().map(|v| g.grad_or_zeros(*v)).collect());
    }
    Ok((stats, actor_grads, critic_grads))
}

/// Several epochs of shuffled minibatch Adam steps on the clipped surrogate
/// (actor) and the squared return error (critic). Parameters are restored to
/// their pre-update values if anything turns non-finite.
pub fn update<R: Rng + ?Sized>(
    params: &mut PolicyParams,
    actor_opt: &mut Adam,
    critic_opt: &mut Adam,
    buffer: &RolloutBuffer,
    hyper: &PpoHyper,
    rng: &mut R,
) -> Result<UpdateReport, PpoError> {
    hyper.validate()?;
    if buffer.is_empty() {
        return Err(PpoError::Usage("cannot update on an empty buffer".into()));
    }
    let raw: Vec<f64> = buffer.transitions.iter().map(|t| t.advantage).collect();
    let advantages = normalized(&raw);
    let before = params.clone();
    let result = run_epochs(params, actor_opt, critic_opt, buffer, &advantages, hyper, rng);
    match result {
        Ok(report) if params.is_finite() && report.policy_loss.is_finite() && report.value_loss.is_finite() => Ok(report),
        Ok(_) => {
            *params = before;
            Err(PpoError::Numerical { index: 0, message: "update produced non-finite losses or parameters".into() })
        }
        Err(e) => {
            *params = before;
            Err(e)
        }
    }
}

fn run_epochs<R: Rng + ?Sized>(
    params: &mut PolicyParams,
    actor_opt: &mut Adam,
    critic_opt: &mut Adam,
    buffer: &RolloutBuffer,
    advantages: &[f64],
    hyper: &PpoHyper,
    rng: &mut R,
) -> Result<UpdateReport, PpoError> {
    let mut order: Vec<usize> = (0..buffer.len()).collect();
    let (mut policy_sum, mut value_sum, mut kl_sum) = (0.0, 0.0, 0.0);
    let (mut clipped, mut seen, mut minibatches, mut epochs) = (0usize, 0usize, 0usize, 0usize);
    let mut early_stopped = false;
    'epochs: for _ in 0..hyper.update_epochs {
        order.shuffle(rng);
        for chunk in order.chunks(hyper.minibatch_size) {
            let (stats, ga, gc) = minibatch_gradients(params, buffer, chunk, advantages, hyper)?;
            let kl = stats.kl_sum / chunk.len() as f64;
            if !stats.policy_loss.is_finite() || !stats.value_loss.is_finite() {
                return Err(PpoError::Numerical { index: chunk[0], message: "loss is not finite".into() });
            }
            if hyper.target_kl.is_some_and(|t| kl > t) {
                early_stopped = true;
                break 'epochs;
            }
            actor_opt.step(&mut params.actor, &ga)?;
            critic_opt.step(&mut params.critic, &gc)?;
            policy_sum += stats.policy_loss;
            value_sum += stats.value_loss;
            kl_sum += kl;
            clipped += stats.clipped;
            seen += chunk.len();
            minibatches += 1;
        }
        epochs += 1;
    }
    let per = |s: f64| if minibatches == 0 { 0.0 } else { s / minibatches as f64 };
    Ok(UpdateReport {
        policy_loss: per(policy_sum),
        value_loss: per(value_sum),
        clip_fraction: if seen == 0 { 0.0 } else { clipped as f64 / seen as f64 },
        approx_kl: per(kl_sum),
        epochs,
        minibatches,
        early_stopped,
        samples: buffer.len(),
    })
}
