use rand::Rng;

use super::{EpisodeSummary, PpoError, PpoHyper, RolloutBuffer, Transition};
use crate::env::MarlEnv;
use crate::nets::{act, ActMode, PolicyParams};
use crate::solver::GlobalObservation;

/// Run `hyper.episodes_per_update` episodes with the shared policy, one query
/// per agent per step, and record every agent's transition.
pub fn collect_rollout<R: Rng + ?Sized>(
    env: &mut MarlEnv,
    params: &PolicyParams,
    hyper: &PpoHyper,
    mode: ActMode,
    rng: &mut R,
) -> Result<RolloutBuffer, PpoError> {
    let agents = env.config().n_segments;
    let mut buffer = RolloutBuffer::new(agents);
    for _ in 0..hyper.episodes_per_update {
        let start = buffer.transitions.len();
        let mut views: Vec<GlobalObservation> = env.reset()?.into_iter().map(|v| v.observation).collect();
        let mut nus = Vec::new();
        let mut blow_up = false;
        let mut steps = 0;
        loop {
            let outputs = params.evaluate(&views)?;
            let actions: Vec<_> = outputs.iter().map(|o| act(o, mode, rng)).collect();
            let raw: Vec<f64> = actions.iter().map(|a| a.action).collect();
            let outcome = env.step(&raw)?;
            if outcome.blow_up.is_some() {
                blow_up = true;
                break;
            }
            for (agent, ((view, out), a)) in outcome.views.iter().zip(&outputs).zip(&actions).enumerate() {
                buffer.transitions.push(Transition {
                    agent,
                    step: steps,
                    observation: std::mem::replace(&mut views[agent], view.observation.clone()),
                    action: a.action,
                    sample: a.sample,
                    log_prob: a.log_prob.unwrap_or_else(|| crate::grad::gaussian_logpdf_scalar(a.sample, out.mean, out.log_std)),
                    reward: view.reward,
                    value: out.value,
                    advantage: 0.0,
                    ret: 0.0,
                });
            }
            nus.push(outcome.nu_global);
            steps += 1;
            if outcome.done {
                break;
            }
        }
        let bootstrap = if blow_up || steps == 0 {
            vec![0.0; agents]
        } else {
            params.evaluate(&views)?.iter().map(|o| o.value).collect()
        };
        let rewards = &buffer.transitions[start..];
        let mean = |xs: &[f64]| if xs.is_empty() { f64::NAN } else { xs.iter().sum::<f64>() / xs.len() as f64 };
        let mean_reward = mean(&rewards.iter().map(|t| t.reward).collect::<Vec<_>>());
        buffer.episodes.push(EpisodeSummary {
            start,
            steps,
            bootstrap,
            blow_up,
            mean_nu: mean(&nus),
            final_nu: nus.last().copied().unwrap_or(f64::NAN),
            mean_reward,
        });
    }
    Ok(buffer)
}
