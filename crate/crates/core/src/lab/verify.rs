use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{cmd_baseline, cmd_train, ExperimentConfig, LabError};
use crate::env::{EnvConfig, MarlEnv};
use crate::grad::check::finite_difference_check;
use crate::grad::{GradError, Graph, Tensor};
use crate::nets::{actor_forward, critic_forward, flip_observation, NetError, NetworkSpec, PolicyParams, TrunkKind};
use crate::ppo::{clipped_surrogate, moving_average};
use crate::solver::{
    init_conduction, init_perturbed, init_random_flow, GlobalObservation, OnsetProbe, Solver, SolverConfig, WallProfile,
};

/// Reference critical Rayleigh number for rigid-rigid walls.
pub const REFERENCE_CRITICAL_RA: f64 = 1708.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub threshold: f64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub checks: Vec<CheckResult>,
    pub critical_rayleigh: Option<f64>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            out.push_str(&format!(
                "[{}] {}: {} (value {:.3e}, limit {:.3e})\n",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.detail,
                c.value,
                c.threshold
            ));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VerifyOptions {
    pub fixed_point_steps: usize,
    pub random_pairs: usize,
    pub gradient_seeds: u64,
    /// Also run the multi-hour learning smoke test.
    pub long: bool,
    pub long_episodes: usize,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self { fixed_point_steps: 10_000, random_pairs: 200, gradient_seeds: 5, long: false, long_episodes: 50 }
    }
}

fn check(name: &str, value: f64, threshold: f64, passed: bool, detail: String) -> CheckResult {
    CheckResult { name: name.into(), passed, value, threshold, detail }
}

fn failed(name: &str, e: impl std::fmt::Display) -> CheckResult {
    check(name, f64::NAN, f64::NAN, false, format!("error: {e}"))
}

fn random_profile(rng: &mut ChaCha8Rng, segments: usize) -> WallProfile {
    WallProfile::new((0..segments).map(|_| rng.random_range(-0.5..0.5)).collect())
}

pub(super) fn solver_checks(cfg: &ExperimentConfig, opts: &VerifyOptions, report: &mut VerifyReport) {
    let solver_cfg = &cfg.solver;
    let segments = cfg.env.n_segments;
    let run = || -> Result<Vec<CheckResult>, LabError> {
        let solver = Solver::new(solver_cfg)?;
        let mut out = Vec::new();
        let base = init_conduction(solver_cfg);
        let wall = WallProfile::uniform(segments);
        let mut s = base.clone();
        for _ in 0..opts.fixed_point_steps {
            s = solver.step(&s, &wall)?;
        }
        let drift = s.max_diff(&base);
        out.push(check(
            "conduction_fixed_point",
            drift,
            1e-8,
            drift <= 1e-8,
            format!("max drift after {} steps", opts.fixed_point_steps),
        ));

        let sub = SolverConfig { rayleigh: 1e3, ..solver_cfg.clone() };
        let sub_solver = Solver::new(&sub)?;
        let start = init_perturbed(&sub, 7, 0.2)?;
        let end = sub_solver.advance(&start, &wall, 50.0)?;
        let nu = sub_solver.nusselt_global(&end);
        let decayed = sub_solver.kinetic_energy(&end) <= sub_solver.kinetic_energy(&sub_solver.advance(&start, &wall, 5.0)?);
        out.push(check(
            "subcritical_decay",
            (nu - 1.0).abs(),
            0.01,
            (nu - 1.0).abs() <= 0.01 && decayed,
            format!("Nu = {nu:.6} at Ra = 1e3 after 50 time units"),
        ));

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let flow = init_random_flow(solver_cfg, 3, 0.3)?;
        let p = random_profile(&mut rng, segments);
        let a = solver.step(&flow.mirrored(), &p.mirrored())?;
        let b = solver.step(&flow, &p)?.mirrored();
        let gap = a.max_diff(&b);
        out.push(check("mirror_equivariance", gap, 1e-8, gap <= 1e-8, "step(mirror s) vs mirror(step s)".into()));

        match flow.translated(1, segments) {
            Ok(shifted) => {
                let c = solver.step(&shifted, &p.translated(1))?;
                let d = solver.step(&flow, &p)?.translated(1, segments)?;
                let gap = c.max_diff(&d);
                out.push(check(
                    "translation_equivariance",
                    gap,
                    1e-10,
                    gap <= 1e-10,
                    "step(shift s) vs shift(step s) by one segment".into(),
                ));
            }
            Err(e) => out.push(failed("translation_equivariance", e)),
        }
        Ok(out)
    };
    match run() {
        Ok(c) => report.checks.extend(c),
        Err(e) => report.checks.push(failed("solver_suite", e)),
    }

    let probe = OnsetProbe::default();
    match probe.critical_rayleigh(1000.0, 3000.0, 1.0) {
        Ok(ra) => {
            let dev = (ra - REFERENCE_CRITICAL_RA) / REFERENCE_CRITICAL_RA;
            report.critical_rayleigh = Some(ra);
            report.checks.push(check(
                "critical_rayleigh",
                dev.abs(),
                0.05,
                dev.abs() <= 0.05,
                format!("bisected Ra_c = {ra:.1}, deviation {:+.2}% from {REFERENCE_CRITICAL_RA}", 100.0 * dev),
            ));
        }
        Err(e) => report.checks.push(failed("critical_rayleigh", e)),
    }
}

fn small_spec(base: &NetworkSpec, trunk: TrunkKind) -> NetworkSpec {
    NetworkSpec { trunk, hidden_width: 32, conv_kernels: 16, cnn_dense_width: 12, ..base.clone() }
}

fn perturbed_params(spec: &NetworkSpec, input: [usize; 3], seed: u64) -> Result<PolicyParams, NetError> {
    let mut p = PolicyParams::init(spec, input, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(31).wrapping_add(7));
    for t in p.actor.iter_mut().chain(p.critic.iter_mut()) {
        for v in t.data_mut() {
            *v += rng.random_range(-0.3..0.3);
        }
    }
    Ok(p)
}

fn random_obs(rng: &mut ChaCha8Rng, columns: usize) -> GlobalObservation {
    GlobalObservation::from_data(columns, (0..24 * columns).map(|_| rng.random_range(-1.5..1.5)).collect())
        .expect("sized to the probe layout")
}

pub(super) fn network_checks(cfg: &ExperimentConfig, opts: &VerifyOptions, report: &mut VerifyReport) {
    let columns = cfg.env.probe_columns;
    let input = [3, 8, columns];
    let mode = cfg.network.flip_mode;
    let run = || -> Result<Vec<CheckResult>, LabError> {
        let mut out = Vec::new();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for trunk in [TrunkKind::GiNn, TrunkKind::GiCnn] {
            let mut worst: f64 = 0.0;
            for k in 0..opts.random_pairs {
                let p = perturbed_params(&small_spec(&cfg.network, trunk), input, k as u64)?;
                let x = random_obs(&mut rng, columns);
                let a = p.evaluate(&[x.clone()])?[0];
                let b = p.evaluate(&[flip_observation(&x, mode)])?[0];
                worst = worst.max((a.mean - b.mean).abs()).max((a.value - b.value).abs());
            }
            out.push(check(
                &format!("{}_flip_invariance", trunk.label().to_lowercase().replace('-', "_")),
                worst,
                1e-9,
                worst <= 1e-9,
                format!("max |out(s) - out(flip s)| over {} pairs", opts.random_pairs),
            ));
        }
        let mut broken = 0;
        for k in 0..opts.random_pairs {
            let p = perturbed_params(&small_spec(&cfg.network, TrunkKind::Fc), input, k as u64)?;
            let x = random_obs(&mut rng, columns);
            let a = p.evaluate(&[x.clone()])?[0];
            let b = p.evaluate(&[flip_observation(&x, mode)])?[0];
            if (a.mean - b.mean).abs() > 1e-3 || (a.value - b.value).abs() > 1e-3 {
                broken += 1;
            }
        }
        let frac = broken as f64 / opts.random_pairs.max(1) as f64;
        out.push(check(
            "fc_negative_control",
            frac,
            0.95,
            frac >= 0.95,
            "fraction of pairs where the dense baseline is not flip invariant".into(),
        ));

        // Agents i and N-1-i see mirror images of each other on a mirror-symmetric flow.
        let s = init_random_flow(&cfg.solver, 21, 0.3)?;
        let symmetric = s.combine(0.5, &s.mirrored(), 0.5);
        let env_cfg = EnvConfig { pe_enabled: false, ..cfg.env.clone() };
        let mut env = MarlEnv::new(&cfg.solver, &env_cfg, symmetric, 1.0)?;
        let views: Vec<GlobalObservation> = env.reset()?.into_iter().map(|v| v.observation).collect();
        let p = perturbed_params(&small_spec(&cfg.network, TrunkKind::GiNn), input, 5)?;
        let outs = p.evaluate(&views)?;
        let n = outs.len();
        let gap = (0..n).map(|i| (outs[i].mean - outs[n - 1 - i].mean).abs()).fold(0.0, f64::max);
        out.push(check(
            "mirror_coupling",
            gap,
            1e-8,
            gap <= 1e-8,
            format!("mirrored agents' action means on a symmetric flow ({mode:?} flip)"),
        ));
        Ok(out)
    };
    match run() {
        Ok(c) => report.checks.extend(c),
        Err(e) => report.checks.push(failed("network_suite", e)),
    }
}

fn as_grad(e: NetError) -> GradError {
    match e {
        NetError::Grad(g) => g,
        other => GradError::Usage(other.to_string()),
    }
}

pub(super) fn gradient_checks(cfg: &ExperimentConfig, opts: &VerifyOptions, report: &mut VerifyReport) {
    let input = [3, 8, 6];
    let run = || -> Result<Vec<CheckResult>, LabError> {
        let mut out = Vec::new();
        for trunk in [TrunkKind::Fc, TrunkKind::GiNn, TrunkKind::GiCnn] {
            let mut worst: f64 = 0.0;
            for seed in 0..opts.gradient_seeds {
                let spec = NetworkSpec { trunk, hidden_width: 5, conv_kernels: 4, cnn_dense_width: 3, ..cfg.network.clone() };
                let p = perturbed_params(&spec, input, seed)?;
                let mut rng = ChaCha8Rng::seed_from_u64(seed + 100);
                let x = Tensor::from_fn(&[2, 3, 8, 6], |_| rng.random_range(-1.0..1.0));
                let mut inputs = p.actor.clone();
                inputs.push(x.clone());
                let actor = finite_difference_check(&inputs, 1e-6, |_, v| {
                    let (actor, x) = v.split_at(v.len() - 1);
                    let (mean, log_std) = actor_forward(&p, actor, x[0]).map_err(as_grad)?;
                    Ok(mean.mul(log_std.exp())?.sum())
                })?;
                let mut inputs = p.critic.clone();
                inputs.push(x);
                let critic = finite_difference_check(&inputs, 1e-6, |_, v| {
                    let (critic, x) = v.split_at(v.len() - 1);
                    Ok(critic_forward(&p, critic, x[0]).map_err(as_grad)?.square().sum())
                })?;
                worst = worst.max(actor.relative_error).max(critic.relative_error);
            }
            out.push(check(
                &format!("{}_gradients", trunk.label().to_lowercase().replace('-', "_")),
                worst,
                1e-4,
                worst <= 1e-4,
                format!("worst finite-difference relative error over {} seeds", opts.gradient_seeds),
            ));
        }

        // Beyond the clip band the per-sample surrogate gradient vanishes.
        let g = Graph::new();
        let ratios = [1.5, 0.5, 1.5, 0.5, 1.0];
        let adv = [1.0, -1.0, -1.0, 1.0, 1.0];
        let lp = g.param(Tensor::new(&[5, 1], ratios.iter().map(|r: &f64| r.ln()).collect())?);
        let loss = clipped_surrogate(lp, &[0.0; 5], &adv, 0.2)?;
        g.backward(loss)?;
        let grad = g.grad_or_zeros(lp);
        let gated = grad.data()[0] == 0.0 && grad.data()[1] == 0.0 && grad.data()[2..].iter().all(|v| *v != 0.0);
        out.push(check(
            "surrogate_gradient_gating",
            grad.data()[0].abs() + grad.data()[1].abs(),
            0.0,
            gated,
            "zero gradient outside the clip band, non-zero inside".into(),
        ));
        Ok(out)
    };
    match run() {
        Ok(c) => report.checks.extend(c),
        Err(e) => report.checks.push(failed("gradient_suite", e)),
    }
}

/// First (one-based) episode whose moving average is at or below `level`.
fn first_reaching(moving: &[f64], level: f64) -> Option<usize> {
    moving.iter().position(|&m| m <= level).map(|i| i + 1)
}

fn read_mean_nu(path: &Path) -> Result<Vec<f64>, LabError> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| LabError::Schema { file: path.into(), message: e.to_string() })?;
    let headers = reader.headers().map_err(|e| LabError::Schema { file: path.into(), message: e.to_string() })?.clone();
    let col = headers
        .iter()
        .position(|h| h == "mean_nu")
        .ok_or_else(|| LabError::Schema { file: path.into(), message: "missing column mean_nu".into() })?;
    reader
        .records()
        .map(|r| {
            let r = r.map_err(|e| LabError::Schema { file: path.into(), message: e.to_string() })?;
            r[col].parse::<f64>().map_err(|e| LabError::Schema { file: path.into(), message: e.to_string() })
        })
        .collect()
}

/// Reduced-scale learning runs: the encoded dense policy should cut the
/// Nusselt number by 3 %, and the invariant dense trunk should reach a common
/// level no later than the plain one on at least one of two seed pairs.
pub fn learning_smoke(cfg: &ExperimentConfig, episodes: usize, out: &Path) -> Result<Vec<CheckResult>, LabError> {
    let mut base = cfg.clone();
    base.solver.nx = 40;
    base.solver.ny = 25;
    base.env.n_segments = 10;
    base.run.episodes = episodes;
    base.run.parallel_seeds = true;
    let shared = out.join("smoke_baseline");
    let meta = cmd_baseline(&base, &shared)?;
    let variant = |name: &str, trunk: TrunkKind, pe: bool, seeds: Vec<u64>| -> Result<Vec<Vec<f64>>, LabError> {
        let mut c = base.clone();
        c.network.trunk = trunk;
        c.env.pe_enabled = pe;
        c.run.seeds = seeds.clone();
        let dir = out.join(format!("smoke_{name}"));
        let target = dir.join(super::BASELINE_DIR);
        std::fs::create_dir_all(&target).map_err(super::io_err(&target))?;
        for f in ["snapshot.bin", "metadata.json", "nusselt.csv"] {
            let from = shared.join(super::BASELINE_DIR).join(f);
            std::fs::copy(&from, target.join(f)).map_err(super::io_err(&from))?;
        }
        let result = cmd_train(&c, &dir)?;
        if let Some(s) = result.seeds.iter().find(|s| s.error.is_some()) {
            return Err(LabError::Usage(format!("{name} seed {} failed: {}", s.seed, s.error.clone().unwrap_or_default())));
        }
        seeds.iter().map(|s| read_mean_nu(&dir.join(format!("learning_curve_seed_{s}.csv")))).collect()
    };
    let mut out_checks = Vec::new();
    let pe = variant("pe_fc", TrunkKind::Fc, true, vec![0])?;
    let moving = moving_average(&pe[0], 10);
    let best = moving.iter().skip(9).fold(f64::INFINITY, |a, &b| a.min(b));
    let drop = (meta.nu_base - best) / meta.nu_base;
    out_checks.push(check(
        "learning_pe_fc_reduction",
        drop,
        0.03,
        drop >= 0.03,
        format!("best 10-episode moving-average Nu {best:.4} vs baseline {:.4}", meta.nu_base),
    ));
    let fc = variant("fc", TrunkKind::Fc, false, vec![0, 1])?;
    let gi = variant("gi_nn", TrunkKind::GiNn, false, vec![0, 1])?;
    let mut wins = 0;
    let mut detail = Vec::new();
    for (a, b) in fc.iter().zip(&gi) {
        let (ma_fc, ma_gi) = (moving_average(a, 10), moving_average(b, 10));
        let level = ma_fc.iter().fold(f64::INFINITY, |x, &y| x.min(y)).max(ma_gi.iter().fold(f64::INFINITY, |x, &y| x.min(y)));
        let (ef, eg) = (first_reaching(&ma_fc, level), first_reaching(&ma_gi, level));
        if let (Some(f), Some(g)) = (ef, eg) {
            if g <= f {
                wins += 1;
            }
        }
        detail.push(format!("level {level:.4}: FC ep {ef:?}, GI-NN ep {eg:?}"));
    }
    out_checks.push(check("learning_gi_nn_speed", wins as f64, 1.0, wins >= 1, detail.join("; ")));
    Ok(out_checks)
}

/// Physics, invariance and gradient suites; the learning smoke test when `opts.long`.
pub fn cmd_verify(cfg: &ExperimentConfig, opts: &VerifyOptions, out: Option<&Path>) -> Result<VerifyReport, LabError> {
    cfg.validate()?;
    let mut report = VerifyReport { checks: Vec::new(), critical_rayleigh: None };
    solver_checks(cfg, opts, &mut report);
    network_checks(cfg, opts, &mut report);
    gradient_checks(cfg, opts, &mut report);
    if opts.long {
        let dir = out.map(Path::to_path_buf).unwrap_or_else(|| cfg.run.out_dir.join("verify_long"));
        match learning_smoke(cfg, opts.long_episodes, &dir) {
            Ok(c) => report.checks.extend(c),
            Err(e) => report.checks.push(failed("learning_smoke", e)),
        }
    }
    if let Some(dir) = out {
        super::write_file(&dir.join("verify_report.json"), serde_json::to_string_pretty(&report).expect("report serializes"))?;
    }
    Ok(report)
}
