use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{io_err, write_file, ExperimentConfig, LabError};
use crate::solver::{init_perturbed, load_snapshot, save_snapshot, FlowState, SnapshotHeader, Solver, WallProfile};

pub const BASELINE_DIR: &str = "baseline";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineMeta {
    /// Time-averaged Nusselt number over the trailing window; the default reward offset.
    pub nu_base: f64,
    /// Nusselt number of the stored snapshot itself.
    pub nu_snapshot: f64,
    pub horizon: f64,
    pub average_window: f64,
    pub seed: u64,
    pub rayleigh: f64,
    pub prandtl: f64,
    pub nx: usize,
    pub ny: usize,
    pub snapshot: String,
}

/// Run the uncontrolled flow for the configured horizon and store the final
/// state, its Nusselt history and the averaged Nusselt number under `out/baseline`.
pub fn cmd_baseline(cfg: &ExperimentConfig, out: &Path) -> Result<BaselineMeta, LabError> {
    cfg.validate()?;
    let solver = Solver::new(&cfg.solver)?;
    let mut state = init_perturbed(&cfg.solver, cfg.run.baseline_seed, cfg.run.baseline_amplitude)?;
    let wall = WallProfile::uniform(cfg.env.n_segments);
    let interval = cfg.env.action_duration.min(cfg.run.baseline_horizon);
    let samples = (cfg.run.baseline_horizon / interval).round().max(1.0) as usize;
    let mut history = String::from("time,nu_global\n");
    let (mut sum, mut count) = (0.0, 0usize);
    let mut last = solver.nusselt_global(&state);
    writeln!(history, "{},{}", state.time, last).expect("string write");
    for _ in 0..samples {
        state = solver.advance(&state, &wall, interval)?;
        last = solver.nusselt_global(&state);
        writeln!(history, "{},{}", state.time, last).expect("string write");
        if state.time > cfg.run.baseline_horizon - cfg.run.baseline_average_window - 1e-9 {
            sum += last;
            count += 1;
        }
    }
    let dir = out.join(BASELINE_DIR);
    std::fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    let header = SnapshotHeader {
        rayleigh: cfg.solver.rayleigh,
        prandtl: cfg.solver.prandtl,
        domain_width: cfg.solver.domain_width,
    };
    save_snapshot(&state, &header, &dir.join("snapshot.bin"))?;
    write_file(&dir.join("nusselt.csv"), history)?;
    let meta = BaselineMeta {
        nu_base: sum / count.max(1) as f64,
        nu_snapshot: last,
        horizon: state.time,
        average_window: cfg.run.baseline_average_window,
        seed: cfg.run.baseline_seed,
        rayleigh: cfg.solver.rayleigh,
        prandtl: cfg.solver.prandtl,
        nx: cfg.solver.nx,
        ny: cfg.solver.ny,
        snapshot: "snapshot.bin".into(),
    };
    write_file(&dir.join("metadata.json"), serde_json::to_string_pretty(&meta).expect("metadata serializes"))?;
    write_file(&out.join("config.toml"), cfg.to_toml())?;
    Ok(meta)
}

/// Stored baseline of `out`, checked against the configured grid and physics.
pub fn load_baseline(cfg: &ExperimentConfig, out: &Path) -> Result<(FlowState, BaselineMeta), LabError> {
    let dir = out.join(BASELINE_DIR);
    let meta_path = dir.join("metadata.json");
    if !meta_path.exists() {
        return Err(LabError::Usage(format!(
            "no baseline in {}; run the baseline command first",
            out.display()
        )));
    }
    let text = std::fs::read_to_string(&meta_path).map_err(io_err(&meta_path))?;
    let meta: BaselineMeta = serde_json::from_str(&text).map_err(|e| LabError::Schema { file: meta_path.clone(), message: e.to_string() })?;
    let (state, header) = load_snapshot(&dir.join(&meta.snapshot))?;
    if state.nx != cfg.solver.nx || state.ny != cfg.solver.ny {
        return Err(LabError::Config(format!(
            "baseline grid {}x{} does not match configured {}x{}",
            state.nx, state.ny, cfg.solver.nx, cfg.solver.ny
        )));
    }
    if header.rayleigh != cfg.solver.rayleigh || header.prandtl != cfg.solver.prandtl || header.domain_width != cfg.solver.domain_width {
        return Err(LabError::Config("baseline physics (Ra, Pr, width) differ from the configuration".into()));
    }
    Ok((state, meta))
}
