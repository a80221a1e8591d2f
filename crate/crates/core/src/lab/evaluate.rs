use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{load_baseline, write_file, ExperimentConfig, LabError};
use crate::env::MarlEnv;
use crate::nets::{act, load_checkpoint, ActMode};
use crate::solver::{cheb::nodes, save_snapshot, FlowState, GlobalObservation, SnapshotHeader, HEIGHT};

pub fn evaluation_header(segments: usize) -> String {
    let mut h = String::from("actuation_index,nu_global");
    for i in 0..segments {
        write!(h, ",nu_local_{i}").expect("string write");
    }
    for i in 0..segments {
        write!(h, ",action_{i}").expect("string write");
    }
    h
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationResult {
    pub csv: PathBuf,
    pub snapshots: Vec<PathBuf>,
    pub actuations: usize,
    pub mean_nu: f64,
    pub final_nu: f64,
    pub blow_up: bool,
}

fn snapshot_csv(cfg: &ExperimentConfig, s: &FlowState) -> String {
    let y = nodes(s.ny, HEIGHT);
    let mut out = String::from("x,y,temperature,u,v\n");
    for (m, ym) in y.iter().enumerate() {
        for j in 0..s.nx {
            let k = s.idx(m, j);
            writeln!(out, "{},{},{},{},{}", cfg.solver.x(j), ym, s.temperature[k], s.u[k], s.v[k]).expect("string write");
        }
    }
    out
}

/// Run one episode with the checkpointed policy and record Nusselt numbers
/// and applied wall offsets after every actuation.
pub fn cmd_evaluate(
    cfg: &ExperimentConfig,
    checkpoint: &Path,
    mode: ActMode,
    seed: u64,
    out: &Path,
) -> Result<EvaluationResult, LabError> {
    cfg.validate()?;
    let params = load_checkpoint(checkpoint)?;
    if params.spec != cfg.network {
        return Err(LabError::Config(format!(
            "checkpoint {} was trained with a different network section ({} trunk) than the configuration ({} trunk)",
            checkpoint.display(),
            params.spec.trunk.label(),
            cfg.network.trunk.label()
        )));
    }
    let expected = [crate::solver::CHANNELS, crate::solver::PROBE_ROWS, cfg.env.probe_columns];
    if params.input != expected {
        return Err(LabError::Config(format!(
            "checkpoint expects observations {:?}, configuration produces {:?}",
            params.input, expected
        )));
    }
    let (start, meta) = load_baseline(cfg, out)?;
    let mut env = MarlEnv::new(&cfg.solver, &cfg.env, start, meta.nu_base)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dir = match mode {
        ActMode::Deterministic => out.join("eval_deterministic"),
        ActMode::Stochastic => out.join(format!("eval_stochastic_seed_{seed}")),
    };
    let header = SnapshotHeader {
        rayleigh: cfg.solver.rayleigh,
        prandtl: cfg.solver.prandtl,
        domain_width: cfg.solver.domain_width,
    };
    let mut csv = format!("{}\n", evaluation_header(cfg.env.n_segments));
    let mut snapshots = Vec::new();
    let mut views: Vec<GlobalObservation> = env.reset()?.into_iter().map(|v| v.observation).collect();
    let mut nus = Vec::new();
    let mut blow_up = false;
    let mut index = 0;
    if cfg.run.snapshot_actuations.contains(&0) {
        snapshots.extend(write_snapshot(cfg, &dir, 0, env.state(), &header)?);
    }
    loop {
        let outputs = params.evaluate(&views)?;
        let raw: Vec<f64> = outputs.iter().map(|o| act(o, mode, &mut rng).action).collect();
        let outcome = env.step(&raw)?;
        if outcome.blow_up.is_some() {
            blow_up = true;
            break;
        }
        index += 1;
        write!(csv, "{index},{}", outcome.nu_global).expect("string write");
        for v in outcome.nu_local.iter().chain(&outcome.offsets) {
            write!(csv, ",{v}").expect("string write");
        }
        csv.push('\n');
        nus.push(outcome.nu_global);
        if cfg.run.snapshot_actuations.contains(&index) {
            snapshots.extend(write_snapshot(cfg, &dir, index, env.state(), &header)?);
        }
        views = outcome.views.into_iter().map(|v| v.observation).collect();
        if outcome.done {
            break;
        }
    }
    let path = dir.join("evaluation.csv");
    write_file(&path, csv)?;
    Ok(EvaluationResult {
        csv: path,
        snapshots,
        actuations: index,
        mean_nu: nus.iter().sum::<f64>() / nus.len().max(1) as f64,
        final_nu: nus.last().copied().unwrap_or(f64::NAN),
        blow_up,
    })
}

fn write_snapshot(
    cfg: &ExperimentConfig,
    dir: &Path,
    index: usize,
    state: &FlowState,
    header: &SnapshotHeader,
) -> Result<Vec<PathBuf>, LabError> {
    let snap_dir = dir.join("snapshots");
    std::fs::create_dir_all(&snap_dir).map_err(super::io_err(&snap_dir))?;
    let bin = snap_dir.join(format!("actuation_{index:04}.bin"));
    save_snapshot(state, header, &bin)?;
    let mut out = vec![bin];
    if cfg.run.snapshot_csv {
        let csv = snap_dir.join(format!("actuation_{index:04}.csv"));
        write_file(&csv, snapshot_csv(cfg, state))?;
        out.push(csv);
    }
    Ok(out)
}
