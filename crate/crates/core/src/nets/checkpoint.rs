//! Checkpoint: magic, version, a JSON header (spec, input shape, seed, layer
//! table), then every tensor as little-endian `f64` in layer-table order.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{NetworkSpec, PolicyParams};
use crate::grad::Tensor;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"RBCCKPT\0";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error("checkpoint i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed checkpoint: {0}")]
    Format(String),
    #[error("unsupported checkpoint version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },
}

#[derive(Serialize, Deserialize)]
struct LayerEntry {
    name: String,
    shape: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    spec: NetworkSpec,
    input: [usize; 3],
    seed: u64,
    layers: Vec<LayerEntry>,
}

pub fn encode_checkpoint(params: &PolicyParams) -> Vec<u8> {
    let (actor, critic) = PolicyParams::layer_names(&params.spec);
    let tensors: Vec<&Tensor> = params.actor.iter().chain(&params.critic).collect();
    let layers = actor
        .into_iter()
        .chain(critic)
        .zip(&tensors)
        .map(|(name, t)| LayerEntry { name, shape: t.shape().to_vec() })
        .collect();
    let header = Header { spec: params.spec.clone(), input: params.input, seed: params.seed, layers };
    let json = serde_json::to_vec(&header).expect("header serializes");
    let mut out = Vec::new();
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    for t in tensors {
        for v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<PolicyParams, CheckpointError> {
    let fmt = |m: String| CheckpointError::Format(m);
    if bytes.len() < 16 || &bytes[..8] != CHECKPOINT_MAGIC {
        return Err(fmt("bad magic bytes".into()));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().expect("four bytes"));
    if version != CHECKPOINT_VERSION {
        return Err(CheckpointError::Version { found: version, expected: CHECKPOINT_VERSION });
    }
    let len = u32::from_le_bytes(bytes[12..16].try_into().expect("four bytes")) as usize;
    let json = bytes.get(16..16 + len).ok_or_else(|| fmt("truncated header".into()))?;
    let header: Header = serde_json::from_slice(json).map_err(|e| fmt(format!("header: {e}")))?;
    let mut params = PolicyParams::init(&header.spec, header.input, header.seed).map_err(|e| fmt(e.to_string()))?;
    let (actor, critic) = PolicyParams::layer_names(&header.spec);
    let expected: Vec<String> = actor.into_iter().chain(critic).collect();
    let names: Vec<&str> = header.layers.iter().map(|l| l.name.as_str()).collect();
    if names != expected {
        return Err(fmt("layer table does not match the architecture".into()));
    }
    let mut payload = &bytes[16 + len..];
    let n_actor = params.actor.len();
    for (i, entry) in header.layers.iter().enumerate() {
        let slot = if i < n_actor { &mut params.actor[i] } else { &mut params.critic[i - n_actor] };
        if slot.shape() != entry.shape.as_slice() {
            return Err(fmt(format!("layer {} has shape {:?}, expected {:?}", entry.name, entry.shape, slot.shape())));
        }
        let n = slot.len() * 8;
        if payload.len() < n {
            return Err(fmt(format!("payload truncated in layer {}", entry.name)));
        }
        for (v, c) in slot.data_mut().iter_mut().zip(payload[..n].chunks_exact(8)) {
            *v = f64::from_le_bytes(c.try_into().expect("eight bytes"));
        }
        payload = &payload[n..];
    }
    if !payload.is_empty() {
        return Err(fmt(format!("{} trailing bytes", payload.len())));
    }
    Ok(params)
}

pub fn save_checkpoint(params: &PolicyParams, path: &Path) -> Result<(), CheckpointError> {
    std::fs::write(path, encode_checkpoint(params))?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<PolicyParams, CheckpointError> {
    decode_checkpoint(&std::fs::read(path)?)
}
