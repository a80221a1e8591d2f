use super::{NetError, PolicyParams, TrunkKind, LOG_STD_MAX, LOG_STD_MIN};
use crate::grad::{Graph, Tensor, Var};
use crate::solver::GlobalObservation;

/// Stack observations into a `[B, C, H, W]` tensor.
pub fn batch_tensor(obs: &[GlobalObservation]) -> Result<Tensor, NetError> {
    let items: Vec<Tensor> = obs.iter().map(GlobalObservation::to_tensor).collect();
    Ok(Tensor::stack(&items)?)
}

/// One tanh dense branch on `[B, C, H, W]` input.
pub fn dense_branch<'g>(layers: &[Var<'g>], x: Var<'g>) -> Result<Var<'g>, NetError> {
    let shape = x.shape();
    let flat: usize = shape[1..].iter().product();
    let mut h = x.reshape(&[shape[0], flat])?;
    for pair in layers.chunks(2) {
        h = h.matmul(pair[0])?.add_bias(pair[1])?.tanh();
    }
    Ok(h)
}

fn conv_branch<'g>(kernels: Var<'g>, bias: Var<'g>, x: Var<'g>) -> Result<Var<'g>, NetError> {
    Ok(x.conv2d_zero_pad(kernels, Some(bias))?.tanh())
}

/// Trunk output `[B, F]` for input `x` of shape `[B, C, H, W]`.
pub fn trunk_features<'g>(params: &PolicyParams, trunk: &[Var<'g>], x: Var<'g>) -> Result<Var<'g>, NetError> {
    let shape = x.shape();
    if shape.len() != 4 || shape[1..] != params.input {
        let found = [shape.get(1).copied().unwrap_or(0), shape.get(2).copied().unwrap_or(0), shape.get(3).copied().unwrap_or(0)];
        return Err(NetError::Input { expected: params.input, found });
    }
    let signs = params.spec.flip_mode.signs();
    match params.spec.trunk {
        TrunkKind::Fc => dense_branch(trunk, x),
        TrunkKind::GiNn => {
            let a = dense_branch(trunk, x)?;
            let b = dense_branch(trunk, x.reverse_width(&signs)?)?;
            let sum = a.add(b)?;
            Ok(if params.spec.half_branch_sum { sum.scale(0.5) } else { sum })
        }
        TrunkKind::GiCnn => {
            let a = conv_branch(trunk[0], trunk[1], x)?;
            let b = conv_branch(trunk[0], trunk[1], x.reverse_width(&signs)?)?;
            let pooled = a.add(b)?.mean_spatial()?;
            Ok(pooled.matmul(trunk[2])?.add_bias(trunk[3])?.tanh())
        }
    }
}

/// Action mean `[B, 1]` in (-1, 1) and the clipped log standard deviation broadcast to `[B, 1]`.
pub fn actor_forward<'g>(params: &PolicyParams, actor: &[Var<'g>], x: Var<'g>) -> Result<(Var<'g>, Var<'g>), NetError> {
    let n = params.trunk_len();
    let f = trunk_features(params, &actor[..n], x)?;
    let mean = f.matmul(actor[n])?.add_bias(actor[n + 1])?.tanh();
    let batch = x.shape()[0];
    let log_std = actor[n + 2].clip(LOG_STD_MIN, LOG_STD_MAX).expand(&[batch, 1])?;
    Ok((mean, log_std))
}

/// State value `[B, 1]`.
pub fn critic_forward<'g>(params: &PolicyParams, critic: &[Var<'g>], x: Var<'g>) -> Result<Var<'g>, NetError> {
    let n = params.trunk_len();
    let f = trunk_features(params, &critic[..n], x)?;
    Ok(f.matmul(critic[n])?.add_bias(critic[n + 1])?)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicyOutput {
    pub mean: f64,
    pub log_std: f64,
    pub value: f64,
}

impl PolicyOutput {
    pub fn std(&self) -> f64 {
        self.log_std.exp()
    }
}

impl PolicyParams {
    /// Gradient-free evaluation of both networks on a batch.
    pub fn evaluate(&self, obs: &[GlobalObservation]) -> Result<Vec<PolicyOutput>, NetError> {
        if obs.is_empty() {
            return Ok(Vec::new());
        }
        for o in obs {
            if o.shape() != self.input {
                return Err(NetError::Input { expected: self.input, found: o.shape() });
            }
        }
        let g = Graph::new();
        let x = g.constant(batch_tensor(obs)?);
        let actor: Vec<Var> = self.actor.iter().map(|t| g.constant(t.clone())).collect();
        let critic: Vec<Var> = self.critic.iter().map(|t| g.constant(t.clone())).collect();
        let (mean, log_std) = actor_forward(self, &actor, x)?;
        let value = critic_forward(self, &critic, x)?;
        let (mean, log_std, value) = (mean.value(), log_std.value(), value.value());
        Ok((0..obs.len())
            .map(|i| PolicyOutput { mean: mean.data()[i], log_std: log_std.data()[i], value: value.data()[i] })
            .collect())
    }
}

/// A network whose inputs get a fixed field added to the temperature channel.
#[derive(Debug, Clone)]
pub struct PeNet<'a> {
    pub net: &'a PolicyParams,
    pub field: Vec<f64>,
}

impl<'a> PeNet<'a> {
    pub fn new(net: &'a PolicyParams, field: Vec<f64>) -> Result<Self, NetError> {
        let [_, h, w] = net.input;
        if field.len() != h * w {
            return Err(NetError::Spec(format!("encoding field has {} values, expected {}", field.len(), h * w)));
        }
        Ok(Self { net, field })
    }

    pub fn evaluate(&self, obs: &[GlobalObservation]) -> Result<Vec<PolicyOutput>, NetError> {
        let shifted: Vec<GlobalObservation> = obs
            .iter()
            .map(|o| {
                let mut o = o.clone();
                for (t, p) in o.channel_mut(0).iter_mut().zip(&self.field) {
                    *t += p;
                }
                o
            })
            .collect();
        self.net.evaluate(&shifted)
    }
}
