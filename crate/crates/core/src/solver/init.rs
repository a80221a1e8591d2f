use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::cheb::{nodes, ChebGrid};
use super::{FlowState, SolverConfig, SolverError, HEIGHT};

const RANDOM_MODES: usize = 4;

/// Quiescent fluid with the linear conduction profile.
pub fn init_conduction(cfg: &SolverConfig) -> FlowState {
    let (nx, ny) = (cfg.nx, cfg.ny);
    let y = nodes(ny, HEIGHT);
    let mut s = FlowState::zeros(nx, ny);
    for (m, &ym) in y.iter().enumerate() {
        let t = if m == 0 {
            cfg.base_bottom_temperature
        } else if m == ny - 1 {
            cfg.top_temperature
        } else {
            cfg.conduction(ym)
        };
        s.temperature[m * nx..(m + 1) * nx].iter_mut().for_each(|v| *v = t);
    }
    s
}

fn bubble(y: f64) -> f64 {
    4.0 * y * (HEIGHT - y) / (HEIGHT * HEIGHT)
}

/// Random low-wavenumber periodic pattern with unit total coefficient mass.
fn random_pattern(cfg: &SolverConfig, rng: &mut ChaCha8Rng) -> Vec<(f64, f64, f64)> {
    let coeffs: Vec<(f64, f64)> =
        (0..RANDOM_MODES).map(|_| (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
    let mass: f64 = coeffs.iter().map(|(a, b)| a.abs() + b.abs()).sum::<f64>().max(f64::MIN_POSITIVE);
    coeffs
        .into_iter()
        .enumerate()
        .map(|(i, (a, b))| (2.0 * std::f64::consts::PI * (i + 1) as f64 / cfg.domain_width, a / mass, b / mass))
        .collect()
}

fn eval_pattern(pattern: &[(f64, f64, f64)], x: f64) -> f64 {
    pattern.iter().map(|(k, a, b)| a * (k * x).cos() + b * (k * x).sin()).sum()
}

fn eval_pattern_dx(pattern: &[(f64, f64, f64)], x: f64) -> f64 {
    pattern.iter().map(|(k, a, b)| k * (b * (k * x).cos() - a * (k * x).sin())).sum()
}

/// Conduction plus a seeded temperature perturbation bounded by `amplitude`
/// that vanishes on both walls.
pub fn init_perturbed(cfg: &SolverConfig, seed: u64, amplitude: f64) -> Result<FlowState, SolverError> {
    if !(amplitude >= 0.0 && amplitude.is_finite()) {
        return Err(SolverError::Usage(format!("perturbation amplitude must be non-negative, got {amplitude}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = init_conduction(cfg);
    let pattern = random_pattern(cfg, &mut rng);
    let y = nodes(cfg.ny, HEIGHT);
    for (m, &ym) in y.iter().enumerate() {
        let shape = amplitude * bubble(ym);
        for j in 0..cfg.nx {
            s.temperature[m * cfg.nx + j] += shape * eval_pattern(&pattern, cfg.x(j));
        }
    }
    Ok(s)
}

/// Perturbed temperature plus a seeded divergence-free velocity field that
/// satisfies no-slip on both walls.
pub fn init_random_flow(cfg: &SolverConfig, seed: u64, amplitude: f64) -> Result<FlowState, SolverError> {
    cfg.validate()?;
    let mut s = init_perturbed(cfg, seed, amplitude)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let pattern = random_pattern(cfg, &mut rng);
    let tilt: f64 = rng.random_range(-0.5..0.5);
    let mean_amp: f64 = rng.random_range(-0.5..0.5) * amplitude;
    let grid = ChebGrid::new(cfg.ny, HEIGHT);
    // psi(x, y) = amplitude * pattern(x) * P(y) with P and P' zero at both walls.
    let profile: Vec<f64> = grid
        .y
        .iter()
        .map(|&y| {
            let b = bubble(y);
            amplitude * b * b * (1.0 + tilt * (2.0 * y / HEIGHT - 1.0))
        })
        .collect();
    let mut dprofile = vec![0.0; cfg.ny];
    grid.d1.apply(&profile, &mut dprofile);
    dprofile[0] = 0.0;
    dprofile[cfg.ny - 1] = 0.0;
    let nx = cfg.nx;
    for m in 0..cfg.ny {
        let mean = if m == 0 || m == cfg.ny - 1 { 0.0 } else { mean_amp * bubble(grid.y[m]) };
        for j in 0..nx {
            let x = cfg.x(j);
            s.u[m * nx + j] = eval_pattern(&pattern, x) * dprofile[m] + mean;
            s.v[m * nx + j] = -eval_pattern_dx(&pattern, x) * profile[m];
        }
    }
    Ok(s)
}
