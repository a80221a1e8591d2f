//! Two-dimensional Rayleigh-Benard convection in free-fall units.
//!
//! The horizontal direction is periodic (Fourier), the wall-normal direction
//! uses Chebyshev collocation. Velocities are carried through a
//! streamfunction, so the discrete flow is divergence free by construction.

pub mod cheb;
mod diagnostics;
mod dns;
pub mod fourier;
mod init;
mod onset;
mod probe;
mod snapshot;
mod symmetry;


use serde::{Deserialize, Serialize};

pub use dns::Solver;
pub use init::{init_conduction, init_perturbed, init_random_flow};
pub use onset::OnsetProbe;
pub use probe::{GlobalObservation, ProbeGrid, CHANNELS, PROBE_ROWS};
pub use snapshot::{
    decode_snapshot, encode_snapshot, load_snapshot, save_snapshot, SnapshotError, SnapshotHeader, SNAPSHOT_VERSION,
};

/// Layer height; all lengths are in units of it.
pub const HEIGHT: f64 = 1.0;
/// Any field exceeding this magnitude aborts the run.
pub const BLOWUP_THRESHOLD: f64 = 1e3;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SolverError {
    #[error("invalid solver configuration: {0}")]
    Config(String),
    #[error("{0}")]
    Usage(String),
    #[error("solver blew up at t = {time} (max |field| = {max_abs})")]
    BlowUp { time: f64, max_abs: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub rayleigh: f64,
    pub prandtl: f64,
    /// Domain width `Lx` in units of the layer height.
    pub domain_width: f64,
    pub nx: usize,
    pub ny: usize,
    pub dt: f64,
    pub top_temperature: f64,
    pub base_bottom_temperature: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            rayleigh: 1.0e4,
            prandtl: 0.7,
            domain_width: 2.0 * std::f64::consts::PI,
            nx: 60,
            ny: 33,
            dt: 0.005,
            top_temperature: 1.0,
            base_bottom_temperature: 2.0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SolverError> {
        let bad = |msg: String| Err(SolverError::Config(msg));
        if !(self.rayleigh > 0.0 && self.rayleigh.is_finite()) {
            return bad(format!("rayleigh must be positive, got {}", self.rayleigh));
        }
        if !(self.prandtl > 0.0 && self.prandtl.is_finite()) {
            return bad(format!("prandtl must be positive, got {}", self.prandtl));
        }
        if !(self.domain_width > 0.0 && self.domain_width.is_finite()) {
            return bad(format!("domain_width must be positive, got {}", self.domain_width));
        }
        if self.nx < 16 || self.nx % 2 != 0 {
            return bad(format!("nx must be even and at least 16, got {}", self.nx));
        }
        if self.ny < 17 {
            return bad(format!("ny must be at least 17, got {}", self.ny));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.base_bottom_temperature > self.top_temperature) {
            return bad(format!(
                "bottom temperature {} must exceed top temperature {}",
                self.base_bottom_temperature, self.top_temperature
            ));
        }
        Ok(())
    }

    pub fn viscosity(&self) -> f64 {
        (self.prandtl / self.rayleigh).sqrt()
    }

    pub fn diffusivity(&self) -> f64 {
        1.0 / (self.rayleigh * self.prandtl).sqrt()
    }

    pub fn delta_t(&self) -> f64 {
        self.base_bottom_temperature - self.top_temperature
    }

    /// Conduction temperature at height `y`.
    pub fn conduction(&self, y: f64) -> f64 {
        self.base_bottom_temperature - self.delta_t() * y / HEIGHT
    }

    /// Horizontal position of grid column `j` (half-cell offset).
    pub fn x(&self, j: usize) -> f64 {
        (j as f64 + 0.5) * self.domain_width / self.nx as f64
    }

    /// Segment owning grid column `j` for `segments` equal segments.
    pub fn segment_of(&self, j: usize, segments: usize) -> usize {
        ((2 * j + 1) * segments) / (2 * self.nx)
    }
}

/// Prognostic fields on the `ny x nx` grid, row-major with row 0 at the
/// bottom wall.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowState {
    pub nx: usize,
    pub ny: usize,
    pub time: f64,
    pub temperature: Vec<f64>,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

impl FlowState {
    pub fn zeros(nx: usize, ny: usize) -> Self {
        Self {
            nx,
            ny,
            time: 0.0,
            temperature: vec![0.0; nx * ny],
            u: vec![0.0; nx * ny],
            v: vec![0.0; nx * ny],
        }
    }

    #[inline]
    pub fn idx(&self, m: usize, j: usize) -> usize {
        m * self.nx + j
    }

    /// `a * self + b * other`, keeping this state's time.
    pub fn combine(&self, a: f64, other: &FlowState, b: f64) -> FlowState {
        let mix = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| a * p + b * q).collect();
        FlowState {
            nx: self.nx,
            ny: self.ny,
            time: self.time,
            temperature: mix(&self.temperature, &other.temperature),
            u: mix(&self.u, &other.u),
            v: mix(&self.v, &other.v),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.temperature
            .iter()
            .chain(&self.u)
            .chain(&self.v)
            .fold(0.0f64, |acc, v| if v.is_nan() { f64::NAN } else { acc.max(v.abs()) })
    }

    /// Largest pointwise difference over all three fields.
    pub fn max_diff(&self, other: &FlowState) -> f64 {
        let d = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        d(&self.temperature, &other.temperature)
            .max(d(&self.u, &other.u))
            .max(d(&self.v, &other.v))
    }

    pub(crate) fn check_grid(&self, cfg: &SolverConfig) -> Result<(), SolverError> {
        if self.nx != cfg.nx || self.ny != cfg.ny {
            return Err(SolverError::Usage(format!(
                "state grid {}x{} does not match config grid {}x{}",
                self.nx, self.ny, cfg.nx, cfg.ny
            )));
        }
        let n = self.nx * self.ny;
        if self.temperature.len() != n || self.u.len() != n || self.v.len() != n {
            return Err(SolverError::Usage("state field lengths do not match its grid".into()));
        }
        Ok(())
    }
}

/// Temperature offsets applied to equal-width bottom-wall segments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WallProfile {
    pub segment_offsets: Vec<f64>,
}

impl WallProfile {
    pub fn uniform(segments: usize) -> Self {
        Self { segment_offsets: vec![0.0; segments] }
    }

    pub fn new(segment_offsets: Vec<f64>) -> Self {
        Self { segment_offsets }
    }

    pub fn segments(&self) -> usize {
        self.segment_offsets.len()
    }
}
