use std::f64::consts::PI;

use super::cheb::ChebGrid;
use super::{FlowState, SolverConfig, SolverError, HEIGHT};
use crate::grad::Tensor;

/// Number of wall-normal probe stations.
pub const PROBE_ROWS: usize = 8;
/// Channels of an observation, in order: temperature, u, v.
pub const CHANNELS: usize = 3;

/// Probe image with layout `[channel][row][column]`, channels `(T, u, v)` and
/// row 0 nearest the bottom wall.
#[derive(Debug, Clone, PartialEq)]
pub struct GlobalObservation {
    pub columns: usize,
    pub data: Vec<f64>,
}

impl GlobalObservation {
    pub fn zeros(columns: usize) -> Self {
        Self { columns, data: vec![0.0; CHANNELS * PROBE_ROWS * columns] }
    }

    pub fn from_data(columns: usize, data: Vec<f64>) -> Result<Self, SolverError> {
        if data.len() != CHANNELS * PROBE_ROWS * columns {
            return Err(SolverError::Usage(format!(
                "observation with {columns} columns needs {} values, got {}",
                CHANNELS * PROBE_ROWS * columns,
                data.len()
            )));
        }
        Ok(Self { columns, data })
    }

    #[inline]
    pub fn index(&self, channel: usize, row: usize, col: usize) -> usize {
        (channel * PROBE_ROWS + row) * self.columns + col
    }

    #[inline]
    pub fn at(&self, channel: usize, row: usize, col: usize) -> f64 {
        self.data[self.index(channel, row, col)]
    }

    pub fn channel(&self, channel: usize) -> &[f64] {
        let n = PROBE_ROWS * self.columns;
        &self.data[channel * n..(channel + 1) * n]
    }

    pub fn channel_mut(&mut self, channel: usize) -> &mut [f64] {
        let n = PROBE_ROWS * self.columns;
        &mut self.data[channel * n..(channel + 1) * n]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn shape(&self) -> [usize; 3] {
        [CHANNELS, PROBE_ROWS, self.columns]
    }

    pub fn to_tensor(&self) -> Tensor {
        Tensor::new(&self.shape(), self.data.clone()).expect("observation layout matches its shape")
    }

    /// Columns reversed on every channel, each channel multiplied by its sign.
    pub fn reversed(&self, signs: [f64; CHANNELS]) -> Self {
        let w = self.columns;
        let mut out = self.clone();
        for (c, sign) in signs.iter().enumerate() {
            for r in 0..PROBE_ROWS {
                for col in 0..w {
                    let dst = out.index(c, r, col);
                    out.data[dst] = sign * self.at(c, r, w - 1 - col);
                }
            }
        }
        out
    }

    /// Circular column shift: `out[.., .., c] = self[.., .., (c + shift) mod W]`.
    pub fn rolled(&self, shift: isize) -> Self {
        let w = self.columns as isize;
        let mut out = self.clone();
        for c in 0..CHANNELS {
            for r in 0..PROBE_ROWS {
                for col in 0..self.columns {
                    let src = (col as isize + shift).rem_euclid(w) as usize;
                    let dst = out.index(c, r, col);
                    out.data[dst] = self.at(c, r, src);
                }
            }
        }
        out
    }
}

/// Fixed interpolation from the solver grid to the probe stations.
#[derive(Debug, Clone)]
pub struct ProbeGrid {
    columns: usize,
    nx: usize,
    ny: usize,
    x_stations: Vec<f64>,
    y_stations: Vec<f64>,
    wx: Vec<f64>,
    wy: Vec<f64>,
}

impl ProbeGrid {
    /// Stations at `x = (p + 1/2) Lx / columns` and at the interior
    /// Gauss-Lobatto heights of a 10-point grid.
    pub fn new(cfg: &SolverConfig, columns: usize) -> Result<Self, SolverError> {
        cfg.validate()?;
        if columns == 0 {
            return Err(SolverError::Config("probe grid needs at least one column".into()));
        }
        let (nx, ny) = (cfg.nx, cfg.ny);
        let x_stations: Vec<f64> = (0..columns).map(|p| (p as f64 + 0.5) * cfg.domain_width / columns as f64).collect();
        let y_stations: Vec<f64> = (0..PROBE_ROWS)
            .map(|q| HEIGHT * (1.0 - (PI * (q + 1) as f64 / (PROBE_ROWS + 1) as f64).cos()) / 2.0)
            .collect();
        let h = cfg.domain_width / nx as f64;
        let half = nx / 2;
        let mut wx = vec![0.0; columns * nx];
        for (p, &x) in x_stations.iter().enumerate() {
            let s = x / h - 0.5;
            for j in 0..nx {
                let d = s - j as f64;
                let mut w = 1.0 + (PI * d).cos();
                for k in 1..half {
                    w += 2.0 * (2.0 * PI * k as f64 * d / nx as f64).cos();
                }
                wx[p * nx + j] = w / nx as f64;
            }
        }
        let grid = ChebGrid::new(ny, HEIGHT);
        let mut wy = Vec::with_capacity(PROBE_ROWS * ny);
        for &y in &y_stations {
            wy.extend(grid.interpolation_row(y));
        }
        Ok(Self { columns, nx, ny, x_stations, y_stations, wx, wy })
    }

    pub fn columns(&self) -> usize {
        self.columns
    }

    pub fn x_stations(&self) -> &[f64] {
        &self.x_stations
    }

    pub fn y_stations(&self) -> &[f64] {
        &self.y_stations
    }

    pub fn sample(&self, state: &FlowState) -> Result<GlobalObservation, SolverError> {
        if state.nx != self.nx || state.ny != self.ny {
            return Err(SolverError::Usage(format!(
                "state grid {}x{} does not match probe grid {}x{}",
                state.nx, state.ny, self.nx, self.ny
            )));
        }
        let (nx, ny, w) = (self.nx, self.ny, self.columns);
        let mut out = GlobalObservation::zeros(w);
        let mut rows = vec![0.0; PROBE_ROWS * nx];
        for (c, field) in [&state.temperature, &state.u, &state.v].into_iter().enumerate() {
            rows.iter_mut().for_each(|v| *v = 0.0);
            for r in 0..PROBE_ROWS {
                for m in 0..ny {
                    let a = self.wy[r * ny + m];
                    if a == 0.0 {
                        continue;
                    }
                    for j in 0..nx {
                        rows[r * nx + j] += a * field[m * nx + j];
                    }
                }
            }
            for r in 0..PROBE_ROWS {
                for p in 0..w {
                    let v: f64 = rows[r * nx..(r + 1) * nx].iter().zip(&self.wx[p * nx..(p + 1) * nx]).map(|(a, b)| a * b).sum();
                    let idx = out.index(c, r, p);
                    out.data[idx] = v;
                }
            }
        }
        Ok(out)
    }
}
