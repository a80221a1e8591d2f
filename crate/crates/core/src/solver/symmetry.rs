use super::{FlowState, SolverError, WallProfile};

fn map_columns(field: &[f64], nx: usize, sign: f64, src: impl Fn(usize) -> usize) -> Vec<f64> {
    let mut out = vec![0.0; field.len()];
    for (row_out, row_in) in out.chunks_mut(nx).zip(field.chunks(nx)) {
        for (j, o) in row_out.iter_mut().enumerate() {
            *o = sign * row_in[src(j)];
        }
    }
    out
}

impl FlowState {
    /// Reflection `x -> Lx - x`; the horizontal velocity changes sign.
    pub fn mirrored(&self) -> FlowState {
        let nx = self.nx;
        let src = |j: usize| nx - 1 - j;
        FlowState {
            nx,
            ny: self.ny,
            time: self.time,
            temperature: map_columns(&self.temperature, nx, 1.0, src),
            u: map_columns(&self.u, nx, -1.0, src),
            v: map_columns(&self.v, nx, 1.0, src),
        }
    }

    /// Periodic shift by `k` segment widths in the positive x direction.
    pub fn translated(&self, k: isize, segments: usize) -> Result<FlowState, SolverError> {
        let nx = self.nx;
        if segments == 0 || nx % segments != 0 {
            return Err(SolverError::Config(format!(
                "nx = {nx} is not divisible by {segments} segments; translation needs aligned segments"
            )));
        }
        let shift = k * (nx / segments) as isize;
        let src = |j: usize| (j as isize - shift).rem_euclid(nx as isize) as usize;
        Ok(FlowState {
            nx,
            ny: self.ny,
            time: self.time,
            temperature: map_columns(&self.temperature, nx, 1.0, src),
            u: map_columns(&self.u, nx, 1.0, src),
            v: map_columns(&self.v, nx, 1.0, src),
        })
    }
}

impl WallProfile {
    /// Segment `i` maps to segment `N_s - 1 - i`.
    pub fn mirrored(&self) -> WallProfile {
        WallProfile { segment_offsets: self.segment_offsets.iter().rev().copied().collect() }
    }

    /// Segment `i` moves to segment `i + k` (periodically).
    pub fn translated(&self, k: isize) -> WallProfile {
        let n = self.segment_offsets.len() as isize;
        let segment_offsets = (0..n).map(|i| self.segment_offsets[(i - k).rem_euclid(n) as usize]).collect();
        WallProfile { segment_offsets }
    }
}
