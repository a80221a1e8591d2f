//! Linear onset of convection measured with the nonlinear solver.

use super::cheb::nodes;
use super::{init_conduction, FlowState, Solver, SolverConfig, SolverError, WallProfile, HEIGHT};

const CHUNK: f64 = 10.0;

fn deviation_norm(s: &FlowState, base: &FlowState) -> f64 {
    let d = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>();
    (d(&s.temperature, &base.temperature) + d(&s.u, &base.u) + d(&s.v, &base.v)).sqrt()
}

/// Settings for growth-rate measurements of a single horizontal mode.
#[derive(Debug, Clone, PartialEq)]
pub struct OnsetProbe {
    /// Base configuration; its Rayleigh number is overridden.
    pub base: SolverConfig,
    /// Horizontal wavenumber index of the seeded mode.
    pub mode: usize,
    pub amplitude: f64,
    /// Time allowed for faster-decaying components to die out.
    pub settle: f64,
    /// Time over which the growth rate is measured.
    pub window: f64,
}

impl Default for OnsetProbe {
    fn default() -> Self {
        Self {
            base: SolverConfig { nx: 16, ny: 17, dt: 0.02, ..SolverConfig::default() },
            mode: 3,
            amplitude: 1e-5,
            settle: 100.0,
            window: 60.0,
        }
    }
}

impl OnsetProbe {
    /// Exponential growth rate of the perturbation amplitude at `rayleigh`,
    /// in free-fall time units. The perturbation is rescaled to `amplitude`
    /// after every chunk so it stays in the linear regime.
    pub fn growth_rate(&self, rayleigh: f64) -> Result<f64, SolverError> {
        let cfg = SolverConfig { rayleigh, ..self.base.clone() };
        let solver = Solver::new(&cfg)?;
        let base = init_conduction(&cfg);
        let mut s = base.clone();
        let y = nodes(cfg.ny, HEIGHT);
        let kx = 2.0 * std::f64::consts::PI * self.mode as f64 / cfg.domain_width;
        for m in 1..cfg.ny - 1 {
            let shape = self.amplitude * 4.0 * y[m] * (HEIGHT - y[m]) / (HEIGHT * HEIGHT);
            for j in 0..cfg.nx {
                s.temperature[m * cfg.nx + j] += shape * (kx * cfg.x(j)).cos();
            }
        }
        let wall = WallProfile::uniform(1);
        let chunk = CHUNK.min(self.window);
        let chunks = ((self.settle + self.window) / chunk).ceil() as usize;
        let measured = (self.window / chunk).ceil() as usize;
        let mut log_growth = 0.0;
        let mut elapsed = 0.0;
        for c in 0..chunks {
            let before = deviation_norm(&s, &base);
            let t0 = s.time;
            s = solver.advance(&s, &wall, chunk)?;
            let after = deviation_norm(&s, &base);
            if !(before > 0.0 && after > 0.0) {
                return Err(SolverError::Usage("perturbation vanished; increase the amplitude".into()));
            }
            if c + measured >= chunks {
                log_growth += (after / before).ln();
                elapsed += s.time - t0;
            }
            let scale = self.amplitude / after;
            s = base.combine(1.0 - scale, &s, scale);
        }
        Ok(log_growth / elapsed)
    }

    /// Bisect the sign change of the growth rate inside `[low, high]` until
    /// the bracket is narrower than `tolerance`.
    pub fn critical_rayleigh(&self, low: f64, high: f64, tolerance: f64) -> Result<f64, SolverError> {
        let (mut lo, mut hi) = (low, high);
        if self.growth_rate(lo)? >= 0.0 || self.growth_rate(hi)? <= 0.0 {
            return Err(SolverError::Usage(format!("growth rate does not change sign in [{low}, {high}]")));
        }
        while hi - lo > tolerance {
            let mid = 0.5 * (lo + hi);
            if self.growth_rate(mid)? > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }
}
