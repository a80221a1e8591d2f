use nalgebra::{DMatrix, Dyn, LU};
use rustfft::num_complex::Complex64 as C;

use super::cheb::{ChebGrid, Square};
use super::fourier::Fourier;
use super::{FlowState, SolverConfig, SolverError, WallProfile, BLOWUP_THRESHOLD, HEIGHT};

const ZERO: C = C { re: 0.0, im: 0.0 };
const I: C = C { re: 0.0, im: 1.0 };

/// Spectral prognostic variables: temperature deviation from conduction,
/// streamfunction (modes `1..nx/2`) and the horizontal mean flow.
#[derive(Debug, Clone)]
pub(crate) struct Prognostic {
    pub theta: Vec<C>,
    pub psi: Vec<C>,
    pub u0: Vec<f64>,
}

#[derive(Debug, Clone)]
struct Forcing {
    omega: Vec<C>,
    theta: Vec<C>,
    u0: Vec<f64>,
}

/// Precomputed operators for one configuration.
#[derive(Debug, Clone)]
pub struct Solver {
    cfg: SolverConfig,
    pub(crate) grid: ChebGrid,
    pub(crate) fourier: Fourier,
    pub(crate) wavenumbers: Vec<f64>,
    dealias: usize,
    pub(crate) t_cond: Vec<f64>,
    vorticity_lu: Vec<Option<LU<f64, Dyn, Dyn>>>,
    theta_lu: Vec<LU<f64, Dyn, Dyn>>,
    mean_lu: LU<f64, Dyn, Dyn>,
}

pub(crate) fn apply_c(op: &Square, x: &[C], out: &mut [C]) {
    for (i, o) in out.iter_mut().enumerate() {
        let mut acc = ZERO;
        for (a, b) in op.row(i).iter().zip(x) {
            acc += b * *a;
        }
        *o = acc;
    }
}

fn solve_c(lu: &LU<f64, Dyn, Dyn>, rhs: &[C]) -> Vec<C> {
    let n = rhs.len();
    let mut b = DMatrix::from_fn(n, 2, |i, c| if c == 0 { rhs[i].re } else { rhs[i].im });
    let ok = lu.solve_mut(&mut b);
    debug_assert!(ok, "operator was checked invertible at construction");
    (0..n).map(|i| C::new(b[(i, 0)], b[(i, 1)])).collect()
}

impl Solver {
    pub fn new(cfg: &SolverConfig) -> Result<Self, SolverError> {
        cfg.validate()?;
        let n = cfg.ny;
        let grid = ChebGrid::new(n, HEIGHT);
        let fourier = Fourier::new(cfg.nx);
        let half = cfg.nx / 2;
        let wavenumbers: Vec<f64> =
            (0..=half).map(|k| 2.0 * std::f64::consts::PI * k as f64 / cfg.domain_width).collect();
        let mut t_cond: Vec<f64> = grid.y.iter().map(|&y| cfg.conduction(y)).collect();
        t_cond[0] = cfg.base_bottom_temperature;
        t_cond[n - 1] = cfg.top_temperature;

        let cn = 0.5 * cfg.dt * cfg.viscosity();
        let ck = 0.5 * cfg.dt * cfg.diffusivity();
        let d1 = &grid.d1;
        let d2 = &grid.d2;
        let delta = |i: usize, j: usize| if i == j { 1.0 } else { 0.0 };
        let singular = |what: &str| SolverError::Config(format!("singular {what} operator"));

        let mut vorticity_lu = Vec::with_capacity(half + 1);
        for (k, &kap) in wavenumbers.iter().enumerate() {
            if k == 0 || k == half {
                vorticity_lu.push(None);
                continue;
            }
            let k2 = kap * kap;
            let mut a = DMatrix::<f64>::zeros(2 * n, 2 * n);
            for m in 1..n - 1 {
                for j in 0..n {
                    a[(m, j)] = delta(m, j) - cn * (d2.at(m, j) - k2 * delta(m, j));
                    a[(n + m, n + j)] = d2.at(m, j) - k2 * delta(m, j);
                }
                a[(n + m, m)] = 1.0;
            }
            for j in 0..n {
                a[(0, n + j)] = d1.at(0, j);
                a[(n - 1, n + j)] = d1.at(n - 1, j);
            }
            a[(n, n)] = 1.0;
            a[(2 * n - 1, 2 * n - 1)] = 1.0;
            let lu = a.lu();
            if !lu.is_invertible() {
                return Err(singular("vorticity"));
            }
            vorticity_lu.push(Some(lu));
        }

        let dirichlet = |c: f64, k2: f64| {
            let mut a = DMatrix::<f64>::zeros(n, n);
            for m in 1..n - 1 {
                for j in 0..n {
                    a[(m, j)] = delta(m, j) - c * (d2.at(m, j) - k2 * delta(m, j));
                }
            }
            a[(0, 0)] = 1.0;
            a[(n - 1, n - 1)] = 1.0;
            a.lu()
        };
        let mut theta_lu = Vec::with_capacity(half + 1);
        for &kap in &wavenumbers {
            let lu = dirichlet(ck, kap * kap);
            if !lu.is_invertible() {
                return Err(singular("temperature"));
            }
            theta_lu.push(lu);
        }
        let mean_lu = dirichlet(cn, 0.0);
        if !mean_lu.is_invertible() {
            return Err(singular("mean-flow"));
        }

        Ok(Self {
            cfg: cfg.clone(),
            grid,
            fourier,
            wavenumbers,
            dealias: (cfg.nx - 1) / 3,
            t_cond,
            vorticity_lu,
            theta_lu,
            mean_lu,
        })
    }

    pub fn config(&self) -> &SolverConfig {
        &self.cfg
    }

    /// Wall-normal collocation heights, bottom first.
    pub fn y(&self) -> &[f64] {
        &self.grid.y
    }

    fn modes(&self) -> usize {
        self.fourier.modes()
    }

    pub(crate) fn prognostic(&self, state: &FlowState) -> Prognostic {
        let (nx, n) = (self.cfg.nx, self.cfg.ny);
        let mut dev = state.temperature.clone();
        for m in 0..n {
            for j in 0..nx {
                dev[m * nx + j] -= self.t_cond[m];
            }
        }
        let theta = self.fourier.to_spectral(&dev, n);
        let vh = self.fourier.to_spectral(&state.v, n);
        let mut psi = vec![ZERO; self.modes() * n];
        for k in 1..nx / 2 {
            let kap = self.wavenumbers[k];
            for m in 0..n {
                psi[k * n + m] = I * vh[k * n + m] / kap;
            }
        }
        let u0 = (0..n).map(|m| state.u[m * nx..(m + 1) * nx].iter().sum::<f64>() / nx as f64).collect();
        Prognostic { theta, psi, u0 }
    }

    fn forcing(&self, q: &Prognostic) -> Forcing {
        let (nx, n) = (self.cfg.nx, self.cfg.ny);
        let nk = self.modes();
        let kd = self.dealias;
        let d1 = &self.grid.d1;
        let d2 = &self.grid.d2;
        let mut uh = vec![ZERO; nk * n];
        let mut vh = vec![ZERO; nk * n];
        let mut wxh = vec![ZERO; nk * n];
        let mut wyh = vec![ZERO; nk * n];
        let mut txh = vec![ZERO; nk * n];
        let mut tyh = vec![ZERO; nk * n];
        let mut omega = vec![ZERO; n];
        let mut d2psi = vec![ZERO; n];
        for k in 0..=kd {
            let kap = self.wavenumbers[k];
            let s = k * n..(k + 1) * n;
            if k == 0 {
                let u0: Vec<C> = q.u0.iter().map(|&v| C::new(v, 0.0)).collect();
                let mut du = vec![ZERO; n];
                apply_c(d1, &u0, &mut du);
                uh[s.clone()].copy_from_slice(&u0);
                for (o, d) in omega.iter_mut().zip(&du) {
                    *o = -d;
                }
            } else {
                let psi = &q.psi[s.clone()];
                apply_c(d1, psi, &mut uh[s.clone()]);
                apply_c(d2, psi, &mut d2psi);
                for m in 0..n {
                    vh[k * n + m] = -I * kap * psi[m];
                    omega[m] = -(d2psi[m] - kap * kap * psi[m]);
                    wxh[k * n + m] = I * kap * omega[m];
                }
            }
            apply_c(d1, &omega, &mut wyh[s.clone()]);
            let theta = &q.theta[s.clone()];
            apply_c(d1, theta, &mut tyh[s.clone()]);
            for m in 0..n {
                txh[k * n + m] = I * kap * theta[m];
            }
        }
        let f = &self.fourier;
        let u = f.to_physical(&uh, n);
        let v = f.to_physical(&vh, n);
        let wx = f.to_physical(&wxh, n);
        let wy = f.to_physical(&wyh, n);
        let tx = f.to_physical(&txh, n);
        let ty = f.to_physical(&tyh, n);

        let mut n_omega = vec![0.0; nx * n];
        let mut n_theta = vec![0.0; nx * n];
        let mut uv_mean = vec![ZERO; n];
        for m in 0..n {
            let mut acc = 0.0;
            for j in 0..nx {
                let p = m * nx + j;
                n_omega[p] = -(u[p] * wx[p] + v[p] * wy[p]);
                n_theta[p] = -(u[p] * tx[p] + v[p] * ty[p]);
                acc += u[p] * v[p];
            }
            uv_mean[m] = C::new(acc / nx as f64, 0.0);
        }
        let mut omega_f = f.to_spectral(&n_omega, n);
        let mut theta_f = f.to_spectral(&n_theta, n);
        for k in kd + 1..nk {
            for m in 0..n {
                omega_f[k * n + m] = ZERO;
                theta_f[k * n + m] = ZERO;
            }
        }
        let gradient = self.cfg.delta_t() / HEIGHT;
        for k in 1..nx / 2 {
            let kap = self.wavenumbers[k];
            for m in 0..n {
                let p = k * n + m;
                omega_f[p] += I * kap * q.theta[p];
                theta_f[p] += -I * kap * q.psi[p] * gradient;
            }
        }
        let mut duv = vec![ZERO; n];
        apply_c(d1, &uv_mean, &mut duv);
        Forcing { omega: omega_f, theta: theta_f, u0: duv.iter().map(|c| -c.re).collect() }
    }

    /// `(I + c L) q` for every prognostic, with the vorticity formed from the
    /// streamfunction.
    fn explicit_part(&self, q: &Prognostic) -> Forcing {
        let n = self.cfg.ny;
        let nk = self.modes();
        let cn = 0.5 * self.cfg.dt * self.cfg.viscosity();
        let ck = 0.5 * self.cfg.dt * self.cfg.diffusivity();
        let d2 = &self.grid.d2;
        let mut omega_out = vec![ZERO; nk * n];
        let mut theta_out = vec![ZERO; nk * n];
        let mut tmp = vec![ZERO; n];
        let mut omega = vec![ZERO; n];
        for k in 0..nk {
            let kap2 = self.wavenumbers[k].powi(2);
            let s = k * n..(k + 1) * n;
            if k > 0 && k < self.cfg.nx / 2 {
                let psi = &q.psi[s.clone()];
                apply_c(d2, psi, &mut tmp);
                for m in 0..n {
                    omega[m] = -(tmp[m] - kap2 * psi[m]);
                }
                apply_c(d2, &omega, &mut tmp);
                for m in 0..n {
                    omega_out[k * n + m] = omega[m] + cn * (tmp[m] - kap2 * omega[m]);
                }
            }
            let theta = &q.theta[s];
            apply_c(d2, theta, &mut tmp);
            for m in 0..n {
                theta_out[k * n + m] = theta[m] + ck * (tmp[m] - kap2 * theta[m]);
            }
        }
        let mut d2u = vec![0.0; n];
        d2.apply(&q.u0, &mut d2u);
        let u0 = q.u0.iter().zip(&d2u).map(|(u, d)| u + cn * d).collect();
        Forcing { omega: omega_out, theta: theta_out, u0 }
    }

    fn implicit(&self, base: &Forcing, f0: &Forcing, f1: Option<&Forcing>, wall: &[C]) -> Prognostic {
        let (nx, n) = (self.cfg.nx, self.cfg.ny);
        let nk = self.modes();
        let dt = self.cfg.dt;
        let combine = |b: C, a: C, c: Option<C>| match c {
            None => b + a * dt,
            Some(c) => b + (a + c) * (0.5 * dt),
        };
        let mut psi = vec![ZERO; nk * n];
        let mut theta = vec![ZERO; nk * n];
        let mut rhs2 = vec![ZERO; 2 * n];
        let mut rhs = vec![ZERO; n];
        for k in 0..nk {
            if let Some(lu) = &self.vorticity_lu[k] {
                rhs2.iter_mut().for_each(|v| *v = ZERO);
                for m in 1..n - 1 {
                    let p = k * n + m;
                    rhs2[m] = combine(base.omega[p], f0.omega[p], f1.map(|f| f.omega[p]));
                }
                let sol = solve_c(lu, &rhs2);
                psi[k * n..(k + 1) * n].copy_from_slice(&sol[n..]);
            }
            for m in 1..n - 1 {
                let p = k * n + m;
                rhs[m] = combine(base.theta[p], f0.theta[p], f1.map(|f| f.theta[p]));
            }
            rhs[0] = wall[k];
            rhs[n - 1] = ZERO;
            let sol = solve_c(&self.theta_lu[k], &rhs);
            theta[k * n..(k + 1) * n].copy_from_slice(&sol);
        }
        for m in 1..n - 1 {
            let f = match f1 {
                None => dt * f0.u0[m],
                Some(f1) => 0.5 * dt * (f0.u0[m] + f1.u0[m]),
            };
            rhs[m] = C::new(base.u0[m] + f, 0.0);
        }
        rhs[0] = ZERO;
        rhs[n - 1] = ZERO;
        let u0 = solve_c(&self.mean_lu, &rhs).iter().map(|c| c.re).collect();
        debug_assert_eq!(nx / 2 + 1, nk);
        Prognostic { theta, psi, u0 }
    }

    fn wall_values(&self, profile: &WallProfile) -> Vec<f64> {
        let segments = profile.segments();
        (0..self.cfg.nx).map(|j| profile.segment_offsets[self.cfg.segment_of(j, segments)]).collect()
    }

    fn assemble(&self, q: &Prognostic, profile: &WallProfile, time: f64) -> FlowState {
        let (nx, n) = (self.cfg.nx, self.cfg.ny);
        let nk = self.modes();
        let f = &self.fourier;
        let mut temperature = f.to_physical(&q.theta, n);
        for m in 0..n {
            for j in 0..nx {
                temperature[m * nx + j] += self.t_cond[m];
            }
        }
        let wall = self.wall_values(profile);
        for j in 0..nx {
            temperature[j] = self.cfg.base_bottom_temperature + wall[j];
            temperature[(n - 1) * nx + j] = self.cfg.top_temperature;
        }
        let mut uh = vec![ZERO; nk * n];
        let mut vh = vec![ZERO; nk * n];
        for m in 0..n {
            uh[m] = C::new(q.u0[m], 0.0);
        }
        for k in 1..nx / 2 {
            let kap = self.wavenumbers[k];
            let s = k * n..(k + 1) * n;
            apply_c(&self.grid.d1, &q.psi[s], &mut uh[k * n..(k + 1) * n]);
            for m in 0..n {
                vh[k * n + m] = -I * kap * q.psi[k * n + m];
            }
        }
        let mut u = f.to_physical(&uh, n);
        let mut v = f.to_physical(&vh, n);
        for j in 0..nx {
            for row in [0, n - 1] {
                u[row * nx + j] = 0.0;
                v[row * nx + j] = 0.0;
            }
        }
        FlowState { nx, ny: n, time, temperature, u, v }
    }

    fn check_profile(&self, profile: &WallProfile) -> Result<(), SolverError> {
        let s = profile.segments();
        if s == 0 || s > self.cfg.nx {
            return Err(SolverError::Usage(format!(
                "wall profile needs between 1 and {} segments, got {s}",
                self.cfg.nx
            )));
        }
        if profile.segment_offsets.iter().any(|v| !v.is_finite()) {
            return Err(SolverError::Usage("wall profile offsets must be finite".into()));
        }
        Ok(())
    }

    /// Advance by one time step with the bottom wall held at `profile`.
    pub fn step(&self, state: &FlowState, profile: &WallProfile) -> Result<FlowState, SolverError> {
        state.check_grid(&self.cfg)?;
        self.check_profile(profile)?;
        let wall = self.fourier.row_spectrum(&self.wall_values(profile));
        let q0 = self.prognostic(state);
        let f0 = self.forcing(&q0);
        let base = self.explicit_part(&q0);
        let q1 = self.implicit(&base, &f0, None, &wall);
        let f1 = self.forcing(&q1);
        let q2 = self.implicit(&base, &f0, Some(&f1), &wall);
        let out = self.assemble(&q2, profile, state.time + self.cfg.dt);
        let max_abs = out.max_abs();
        if !(max_abs <= BLOWUP_THRESHOLD) {
            return Err(SolverError::BlowUp { time: out.time, max_abs });
        }
        Ok(out)
    }

    /// Number of steps used for `duration`: the nearest integer multiple of `dt`.
    pub fn steps_for(&self, duration: f64) -> Result<usize, SolverError> {
        if !(duration > 0.0 && duration.is_finite()) {
            return Err(SolverError::Usage(format!("advance duration must be positive, got {duration}")));
        }
        let steps = (duration / self.cfg.dt).round();
        if steps < 1.0 {
            return Err(SolverError::Usage(format!(
                "advance duration {duration} is shorter than half a time step {}",
                self.cfg.dt
            )));
        }
        Ok(steps as usize)
    }

    /// Repeated [`Self::step`] with the profile held fixed.
    pub fn advance(&self, state: &FlowState, profile: &WallProfile, duration: f64) -> Result<FlowState, SolverError> {
        let steps = self.steps_for(duration)?;
        let mut s = self.step(state, profile)?;
        for _ in 1..steps {
            s = self.step(&s, profile)?;
        }
        Ok(s)
    }
}
