//! Actor-critic trunks (dense, group-invariant dense, group-invariant
//! convolutional) with a squashed Gaussian action head.

mod act;
mod checkpoint;
mod forward;
mod params;


use serde::{Deserialize, Serialize};

pub use act::{act, ActMode, Action};
pub use checkpoint::{decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, CheckpointError, CHECKPOINT_VERSION};
pub use forward::{actor_forward, batch_tensor, critic_forward, dense_branch, trunk_features, PeNet, PolicyOutput};
pub use params::{parameter_count, LayerCount, ParameterReport, PolicyParams, LOG_STD_MAX, LOG_STD_MIN};

use crate::grad::GradError;
use crate::solver::{GlobalObservation, CHANNELS};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NetError {
    #[error(transparent)]
    Grad(#[from] GradError),
    #[error("invalid network specification: {0}")]
    Spec(String),
    #[error("input shape {found:?} does not match network input {expected:?}")]
    Input { expected: [usize; 3], found: [usize; 3] },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TrunkKind {
    #[serde(rename = "FC")]
    Fc,
    #[serde(rename = "GI_NN")]
    GiNn,
    #[serde(rename = "GI_CNN")]
    GiCnn,
}

impl TrunkKind {
    pub fn label(self) -> &'static str {
        match self {
            TrunkKind::Fc => "FC",
            TrunkKind::GiNn => "GI-NN",
            TrunkKind::GiCnn => "GI-CNN",
        }
    }
}

/// How an observation is mirrored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FlipMode {
    /// Columns reversed and the horizontal velocity negated.
    #[default]
    Physical,
    /// Columns reversed only.
    Naive,
}

impl FlipMode {
    pub fn signs(self) -> [f64; CHANNELS] {
        match self {
            FlipMode::Physical => [1.0, -1.0, 1.0],
            FlipMode::Naive => [1.0, 1.0, 1.0],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Tanh,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkSpec {
    pub trunk: TrunkKind,
    pub hidden_width: usize,
    pub hidden_layers: usize,
    pub conv_kernels: usize,
    /// Width of the dense layer after pooling in the convolutional trunk.
    pub cnn_dense_width: usize,
    pub flip_mode: FlipMode,
    pub activation: Activation,
    /// Scale the two branch outputs of the invariant dense trunk by 1/2.
    pub half_branch_sum: bool,
    pub log_std_init: f64,
}

impl Default for NetworkSpec {
    fn default() -> Self {
        Self {
            trunk: TrunkKind::Fc,
            hidden_width: 512,
            hidden_layers: 2,
            conv_kernels: 1024,
            cnn_dense_width: 384,
            flip_mode: FlipMode::Physical,
            activation: Activation::Tanh,
            half_branch_sum: false,
            log_std_init: -0.5,
        }
    }
}

impl NetworkSpec {
    pub fn validate(&self) -> Result<(), NetError> {
        let bad = |m: &str| Err(NetError::Spec(m.into()));
        match self.trunk {
            TrunkKind::Fc | TrunkKind::GiNn => {
                if self.hidden_width == 0 || self.hidden_layers == 0 {
                    return bad("dense trunks need hidden_width and hidden_layers of at least 1");
                }
            }
            TrunkKind::GiCnn => {
                if self.conv_kernels == 0 || self.cnn_dense_width == 0 {
                    return bad("the convolutional trunk needs conv_kernels and cnn_dense_width of at least 1");
                }
            }
        }
        if !(LOG_STD_MIN..=LOG_STD_MAX).contains(&self.log_std_init) {
            return bad("log_std_init must lie in [-5, 2]");
        }
        Ok(())
    }

    /// Width of the trunk output feeding the heads.
    pub fn feature_width(&self) -> usize {
        match self.trunk {
            TrunkKind::Fc | TrunkKind::GiNn => self.hidden_width,
            TrunkKind::GiCnn => self.cnn_dense_width,
        }
    }
}

/// Mirror an observation: columns reversed, channels scaled by the mode's signs.
pub fn flip_observation(obs: &GlobalObservation, mode: FlipMode) -> GlobalObservation {
    obs.reversed(mode.signs())
}
