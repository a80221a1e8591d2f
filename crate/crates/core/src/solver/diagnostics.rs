use rustfft::num_complex::Complex64 as C;

use super::dns::Solver;
use super::{FlowState, SolverError, HEIGHT};

impl Solver {
    /// Wall-normal derivative of the temperature deviation from conduction,
    /// row-major like the state.
    fn theta_dy(&self, state: &FlowState) -> Vec<f64> {
        let (nx, n) = (state.nx, state.ny);
        let d1 = &self.grid.d1;
        let mut out = vec![0.0; nx * n];
        for m in 0..n {
            let row = d1.row(m);
            for (p, &w) in row.iter().enumerate() {
                if w == 0.0 {
                    continue;
                }
                let src = &state.temperature[p * nx..(p + 1) * nx];
                let base = self.t_cond[p];
                for j in 0..nx {
                    out[m * nx + j] += w * (src[j] - base);
                }
            }
        }
        out
    }

    /// Volume-averaged heat flux over the conductive flux.
    pub fn nusselt_global(&self, state: &FlowState) -> f64 {
        let cfg = self.config();
        let (nx, n) = (state.nx, state.ny);
        let dtheta = self.theta_dy(state);
        let scale = (cfg.rayleigh * cfg.prandtl).sqrt();
        let mut excess = 0.0;
        for m in 0..n {
            let mut row = 0.0;
            for j in 0..nx {
                let p = m * nx + j;
                row += scale * state.v[p] * state.temperature[p] - dtheta[p];
            }
            excess += self.grid.weights[m] / HEIGHT * row / nx as f64;
        }
        1.0 + excess / (cfg.delta_t() / HEIGHT)
    }

    /// Bottom-wall conductive flux over the conductive reference, per grid column.
    fn bottom_flux(&self, state: &FlowState) -> Vec<f64> {
        let cfg = self.config();
        let nx = state.nx;
        let row = self.grid.d1.row(0);
        let reference = cfg.delta_t() / HEIGHT;
        (0..nx)
            .map(|j| {
                let d: f64 = row
                    .iter()
                    .enumerate()
                    .map(|(p, w)| w * (state.temperature[p * nx + j] - self.t_cond[p]))
                    .sum();
                1.0 - d / reference
            })
            .collect()
    }

    /// Bottom-wall Nusselt number averaged over segment `segment` of `segments`.
    pub fn nusselt_local(&self, state: &FlowState, segment: usize, segments: usize) -> Result<f64, SolverError> {
        if segments == 0 || segment >= segments {
            return Err(SolverError::Usage(format!(
                "segment index {segment} out of range for {segments} segments"
            )));
        }
        let cfg = self.config();
        let flux = self.bottom_flux(state);
        let (mut total, mut count) = (0.0, 0usize);
        for (j, f) in flux.iter().enumerate() {
            if cfg.segment_of(j, segments) == segment {
                total += f;
                count += 1;
            }
        }
        if count == 0 {
            return Err(SolverError::Usage(format!("segment {segment} contains no grid columns")));
        }
        Ok(total / count as f64)
    }

    /// Nusselt number of every segment.
    pub fn nusselt_segments(&self, state: &FlowState, segments: usize) -> Result<Vec<f64>, SolverError> {
        (0..segments).map(|i| self.nusselt_local(state, i, segments)).collect()
    }

    /// Bottom-wall Nusselt number averaged over the whole wall.
    pub fn nusselt_bottom(&self, state: &FlowState) -> f64 {
        let flux = self.bottom_flux(state);
        flux.iter().sum::<f64>() / flux.len() as f64
    }

    /// Domain-averaged kinetic energy `(u^2 + v^2) / 2`.
    pub fn kinetic_energy(&self, state: &FlowState) -> f64 {
        let (nx, n) = (state.nx, state.ny);
        let mut e = 0.0;
        for m in 0..n {
            let row: f64 = (0..nx)
                .map(|j| {
                    let p = m * nx + j;
                    state.u[p] * state.u[p] + state.v[p] * state.v[p]
                })
                .sum();
            e += self.grid.weights[m] / HEIGHT * row / nx as f64;
        }
        0.5 * e
    }

    /// Largest pointwise `|du/dx + dv/dy|` using the solver's derivatives.
    pub fn max_divergence(&self, state: &FlowState) -> f64 {
        let (nx, n) = (state.nx, state.ny);
        let mut uh = self.fourier.to_spectral(&state.u, n);
        for k in 0..self.fourier.modes() {
            let factor = if k == nx / 2 { C::new(0.0, 0.0) } else { C::new(0.0, self.wavenumbers[k]) };
            for m in 0..n {
                uh[k * n + m] *= factor;
            }
        }
        let dudx = self.fourier.to_physical(&uh, n);
        let d1 = &self.grid.d1;
        let mut worst = 0.0f64;
        for m in 0..n {
            for j in 0..nx {
                let dvdy: f64 = d1.row(m).iter().enumerate().map(|(p, w)| w * state.v[p * nx + j]).sum();
                worst = worst.max((dudx[m * nx + j] + dvdy).abs());
            }
        }
        worst
    }
}
