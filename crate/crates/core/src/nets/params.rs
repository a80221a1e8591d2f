use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{NetError, NetworkSpec, TrunkKind};
use crate::grad::Tensor;

pub const LOG_STD_MIN: f64 = -5.0;
pub const LOG_STD_MAX: f64 = 2.0;

const HIDDEN_GAIN: f64 = std::f64::consts::SQRT_2;
const MEAN_HEAD_GAIN: f64 = 0.01;
const VALUE_HEAD_GAIN: f64 = 1.0;

/// Actor and critic parameters. The two networks share architecture but no weights.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyParams {
    pub spec: NetworkSpec,
    /// Observation shape `[channels, rows, columns]`.
    pub input: [usize; 3],
    pub seed: u64,
    pub actor: Vec<Tensor>,
    pub critic: Vec<Tensor>,
}

/// Orthogonal `rows x cols` matrix scaled by `gain`.
fn orthogonal(rows: usize, cols: usize, gain: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let (tall, short) = (rows.max(cols), rows.min(cols));
    let a = DMatrix::<f64>::from_fn(tall, short, |_, _| StandardNormal.sample(rng));
    let qr = a.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..short {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    let mut out = vec![0.0; rows * cols];
    for i in 0..rows {
        for j in 0..cols {
            let v = if rows >= cols { q[(i, j)] } else { q[(j, i)] };
            out[i * cols + j] = gain * v;
        }
    }
    out
}

fn dense(inputs: usize, outputs: usize, gain: f64, rng: &mut ChaCha8Rng) -> [Tensor; 2] {
    let w = Tensor::new(&[inputs, outputs], orthogonal(inputs, outputs, gain, rng)).expect("shape matches data");
    [w, Tensor::zeros(&[outputs])]
}

fn trunk(spec: &NetworkSpec, input: [usize; 3], rng: &mut ChaCha8Rng) -> Vec<Tensor> {
    let [c, _, _] = input;
    let flat: usize = input.iter().product();
    match spec.trunk {
        TrunkKind::Fc | TrunkKind::GiNn => {
            let mut out = Vec::new();
            let mut width = flat;
            for _ in 0..spec.hidden_layers {
                out.extend(dense(width, spec.hidden_width, HIDDEN_GAIN, rng));
                width = spec.hidden_width;
            }
            out
        }
        TrunkKind::GiCnn => {
            let k = spec.conv_kernels;
            let kernels = Tensor::new(&[k, c, 3, 3], orthogonal(k, c * 9, HIDDEN_GAIN, rng)).expect("shape matches data");
            let mut out = vec![kernels, Tensor::zeros(&[k])];
            out.extend(dense(k, spec.cnn_dense_width, HIDDEN_GAIN, rng));
            out
        }
    }
}

impl PolicyParams {
    pub fn init(spec: &NetworkSpec, input: [usize; 3], seed: u64) -> Result<Self, NetError> {
        spec.validate()?;
        if input.iter().any(|&d| d == 0) {
            return Err(NetError::Spec(format!("observation shape {input:?} has an empty axis")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = spec.feature_width();
        let mut actor = trunk(spec, input, &mut rng);
        actor.extend(dense(f, 1, MEAN_HEAD_GAIN, &mut rng));
        actor.push(Tensor::full(&[1], spec.log_std_init));
        let mut critic = trunk(spec, input, &mut rng);
        critic.extend(dense(f, 1, VALUE_HEAD_GAIN, &mut rng));
        Ok(Self { spec: spec.clone(), input, seed, actor, critic })
    }

    /// Names of the actor and critic tensors in storage order.
    pub fn layer_names(spec: &NetworkSpec) -> (Vec<String>, Vec<String>) {
        let mut trunk = Vec::new();
        match spec.trunk {
            TrunkKind::Fc | TrunkKind::GiNn => {
                for i in 0..spec.hidden_layers {
                    trunk.push(format!("dense{i}.weight"));
                    trunk.push(format!("dense{i}.bias"));
                }
            }
            TrunkKind::GiCnn => {
                for n in ["conv.kernels", "conv.bias", "dense.weight", "dense.bias"] {
                    trunk.push(n.to_string());
                }
            }
        }
        let mut actor: Vec<String> = trunk.iter().map(|n| format!("actor.{n}")).collect();
        actor.extend(["actor.mean.weight", "actor.mean.bias", "actor.log_std"].map(String::from));
        let mut critic: Vec<String> = trunk.iter().map(|n| format!("critic.{n}")).collect();
        critic.extend(["critic.value.weight", "critic.value.bias"].map(String::from));
        (actor, critic)
    }

    pub fn trunk_len(&self) -> usize {
        match self.spec.trunk {
            TrunkKind::Fc | TrunkKind::GiNn => 2 * self.spec.hidden_layers,
            TrunkKind::GiCnn => 4,
        }
    }

    pub fn log_std(&self) -> f64 {
        self.actor.last().map(|t| t.data()[0]).unwrap_or(self.spec.log_std_init).clamp(LOG_STD_MIN, LOG_STD_MAX)
    }

    pub fn is_finite(&self) -> bool {
        self.actor.iter().chain(&self.critic).all(Tensor::is_finite)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerCount {
    pub name: String,
    pub shape: Vec<usize>,
    pub weights: usize,
    pub biases: usize,
}

/// Per-layer sizes of one actor trunk; the critic has an identical copy.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParameterReport {
    pub trunk: String,
    pub layers: Vec<LayerCount>,
    /// Trunk weights excluding biases.
    pub trunk_weights: usize,
    pub trunk_biases: usize,
    /// Everything, both networks, heads and biases included.
    pub total: usize,
}

pub fn parameter_count(params: &PolicyParams) -> ParameterReport {
    let (names, _) = PolicyParams::layer_names(&params.spec);
    let mut layers: Vec<LayerCount> = Vec::new();
    for (name, t) in names.iter().zip(&params.actor).take(params.trunk_len()) {
        let layer = name.trim_start_matches("actor.").rsplit_once('.').map(|(l, _)| l).unwrap_or(name).to_string();
        if name.ends_with(".bias") {
            if let Some(last) = layers.last_mut() {
                last.biases += t.len();
            }
        } else {
            layers.push(LayerCount { name: layer, shape: t.shape().to_vec(), weights: t.len(), biases: 0 });
        }
    }
    let total = params.actor.iter().chain(&params.critic).map(Tensor::len).sum();
    ParameterReport {
        trunk: params.spec.trunk.label().to_string(),
        trunk_weights: layers.iter().map(|l| l.weights).sum(),
        trunk_biases: layers.iter().map(|l| l.biases).sum(),
        layers,
        total,
    }
}
