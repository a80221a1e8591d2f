//! Binary snapshot: magic, version, grid, parameters, time, then T, u, v as
//! little-endian `f64` in row-major order.

use std::path::Path;

use super::FlowState;

pub const SNAPSHOT_MAGIC: &[u8; 8] = b"RBCSNAP\0";
pub const SNAPSHOT_VERSION: u32 = 1;
const HEADER_LEN: usize = 8 + 4 + 4 + 4 + 8 * 4;

#[derive(Debug, thiserror::Error)]
pub enum SnapshotError {
    #[error("snapshot i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed snapshot at byte {offset}: {message}")]
    Format { offset: usize, message: String },
    #[error("unsupported snapshot version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },
}

/// Physical parameters stored alongside the fields.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnapshotHeader {
    pub rayleigh: f64,
    pub prandtl: f64,
    pub domain_width: f64,
}

pub fn encode_snapshot(state: &FlowState, header: &SnapshotHeader) -> Vec<u8> {
    let n = state.nx * state.ny;
    let mut out = Vec::with_capacity(HEADER_LEN + 3 * n * 8);
    out.extend_from_slice(SNAPSHOT_MAGIC);
    out.extend_from_slice(&SNAPSHOT_VERSION.to_le_bytes());
    out.extend_from_slice(&(state.nx as u32).to_le_bytes());
    out.extend_from_slice(&(state.ny as u32).to_le_bytes());
    for v in [header.rayleigh, header.prandtl, header.domain_width, state.time] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for field in [&state.temperature, &state.u, &state.v] {
        for v in field.iter() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    offset: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize, what: &str) -> Result<&[u8], SnapshotError> {
        if self.bytes.len() - self.offset < n {
            return Err(SnapshotError::Format {
                offset: self.offset,
                message: format!("truncated while reading {what}"),
            });
        }
        let s = &self.bytes[self.offset..self.offset + n];
        self.offset += n;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32, SnapshotError> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().expect("four bytes")))
    }

    fn f64(&mut self, what: &str) -> Result<f64, SnapshotError> {
        Ok(f64::from_le_bytes(self.take(8, what)?.try_into().expect("eight bytes")))
    }
}

pub fn decode_snapshot(bytes: &[u8]) -> Result<(FlowState, SnapshotHeader), SnapshotError> {
    let mut r = Reader { bytes, offset: 0 };
    if r.take(8, "magic")? != SNAPSHOT_MAGIC {
        return Err(SnapshotError::Format { offset: 0, message: "bad magic bytes".into() });
    }
    let version = r.u32("version")?;
    if version != SNAPSHOT_VERSION {
        return Err(SnapshotError::Version { found: version, expected: SNAPSHOT_VERSION });
    }
    let nx = r.u32("nx")? as usize;
    let ny = r.u32("ny")? as usize;
    let header = SnapshotHeader {
        rayleigh: r.f64("rayleigh")?,
        prandtl: r.f64("prandtl")?,
        domain_width: r.f64("domain width")?,
    };
    let time = r.f64("time")?;
    let n = nx.checked_mul(ny).ok_or_else(|| SnapshotError::Format {
        offset: 12,
        message: format!("grid {nx}x{ny} is too large"),
    })?;
    let mut fields = Vec::with_capacity(3);
    for name in ["temperature", "u", "v"] {
        let raw = r.take(n * 8, name)?;
        fields.push(raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("eight bytes"))).collect::<Vec<f64>>());
    }
    if r.offset != bytes.len() {
        return Err(SnapshotError::Format {
            offset: r.offset,
            message: format!("{} trailing bytes", bytes.len() - r.offset),
        });
    }
    let v = fields.pop().expect("three fields");
    let u = fields.pop().expect("three fields");
    let temperature = fields.pop().expect("three fields");
    Ok((FlowState { nx, ny, time, temperature, u, v }, header))
}

pub fn save_snapshot(state: &FlowState, header: &SnapshotHeader, path: &Path) -> Result<(), SnapshotError> {
    std::fs::write(path, encode_snapshot(state, header))?;
    Ok(())
}

pub fn load_snapshot(path: &Path) -> Result<(FlowState, SnapshotHeader), SnapshotError> {
    decode_snapshot(&std::fs::read(path)?)
}
