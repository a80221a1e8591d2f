use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{load_baseline, write_file, ExperimentConfig, LabError};
use crate::env::MarlEnv;
use crate::ppo::{moving_average, train, EpisodeRecord, TrainLogWriter, Trainer};
use crate::solver::FlowState;

pub const MOVING_AVERAGE_WINDOW: usize = 25;

pub fn learning_curve_header() -> &'static str {
    "episode,variant,seed,mean_nu,final_nu,mean_reward,moving_average_nu,unlearning"
}

/// A run unlearns when, after its moving average bottoms out, it climbs back
/// by more than half of the reduction achieved up to that minimum.
pub fn detect_unlearning(moving: &[f64]) -> bool {
    let Some((imin, &min)) = moving.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)) else {
        return false;
    };
    let reduction = moving[0] - min;
    if !(reduction > 0.0) {
        return false;
    }
    let rebound = moving[imin..].iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b)) - min;
    rebound > 0.5 * reduction
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedOutcome {
    pub seed: u64,
    pub dir: PathBuf,
    pub episodes: usize,
    pub unlearning: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainResult {
    pub variant: String,
    pub seeds: Vec<SeedOutcome>,
    /// Single-run learning curves followed by the averaged one.
    pub curve_files: Vec<PathBuf>,
}

impl TrainResult {
    pub fn all_succeeded(&self) -> bool {
        self.seeds.iter().all(|s| s.error.is_none())
    }
}

fn run_seed(
    cfg: &ExperimentConfig,
    start: &FlowState,
    nu_base: f64,
    seed: u64,
    dir: &Path,
) -> Result<Vec<EpisodeRecord>, LabError> {
    let env = MarlEnv::new(&cfg.solver, &cfg.env, start.clone(), nu_base)?;
    let mut trainer = Trainer::new(env, &cfg.network, cfg.ppo.clone(), seed)?;
    let mut log = TrainLogWriter::create(dir)?;
    log.record_wall_time = cfg.run.record_wall_time;
    log.checkpoint_every = cfg.run.checkpoint_every;
    Ok(train(&mut trainer, cfg.run.episodes, Some(&mut log))?)
}

fn curve_rows(out: &mut String, variant: &str, seed: &str, records: &[(f64, f64, f64)], moving: Option<&[f64]>, unlearning: bool) {
    for (i, (nu, final_nu, reward)) in records.iter().enumerate() {
        let ma = moving.map(|m| m[i].to_string()).unwrap_or_default();
        writeln!(out, "{},{variant},{seed},{nu},{final_nu},{reward},{ma},{}", i + 1, u8::from(unlearning)).expect("string write");
    }
}

/// Train every configured seed and write per-seed and averaged learning curves.
pub fn cmd_train(cfg: &ExperimentConfig, out: &Path) -> Result<TrainResult, LabError> {
    cfg.validate()?;
    if cfg.run.seeds.is_empty() {
        return Err(LabError::Config("at least one seed is required".into()));
    }
    let (start, meta) = load_baseline(cfg, out)?;
    write_file(&out.join("config.toml"), cfg.to_toml())?;
    let variant = cfg.variant();
    let dirs: Vec<PathBuf> = cfg.run.seeds.iter().map(|s| out.join(format!("seed_{s}"))).collect();
    let results: Vec<Result<Vec<EpisodeRecord>, LabError>> = if cfg.run.parallel_seeds {
        std::thread::scope(|scope| {
            let handles: Vec<_> = cfg
                .run
                .seeds
                .iter()
                .zip(&dirs)
                .map(|(&seed, dir)| {
                    let start = &start;
                    scope.spawn(move || run_seed(cfg, start, meta.nu_base, seed, dir))
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().unwrap_or_else(|_| Err(LabError::Usage("training thread panicked".into()))))
                .collect()
        })
    } else {
        cfg.run.seeds.iter().zip(&dirs).map(|(&seed, dir)| run_seed(cfg, &start, meta.nu_base, seed, dir)).collect()
    };

    let mut seeds = Vec::new();
    let mut curve_files = Vec::new();
    let mut series: Vec<Vec<(f64, f64, f64)>> = Vec::new();
    let mut any_unlearning = false;
    for ((&seed, dir), result) in cfg.run.seeds.iter().zip(&dirs).zip(results) {
        match result {
            Ok(records) => {
                let rows: Vec<(f64, f64, f64)> = records.iter().map(|r| (r.mean_nu, r.final_nu, r.mean_reward)).collect();
                let nus: Vec<f64> = rows.iter().map(|r| r.0).collect();
                let moving = moving_average(&nus, MOVING_AVERAGE_WINDOW);
                let unlearning = detect_unlearning(&moving);
                any_unlearning |= unlearning;
                let mut text = format!("{}\n", learning_curve_header());
                curve_rows(&mut text, &variant, &seed.to_string(), &rows, Some(&moving), unlearning);
                let path = out.join(format!("learning_curve_seed_{seed}.csv"));
                write_file(&path, text)?;
                curve_files.push(path);
                seeds.push(SeedOutcome { seed, dir: dir.clone(), episodes: records.len(), unlearning, error: None });
                series.push(rows);
            }
            Err(e) => seeds.push(SeedOutcome { seed, dir: dir.clone(), episodes: 0, unlearning: false, error: Some(e.to_string()) }),
        }
    }
    if !series.is_empty() {
        let len = series.iter().map(Vec::len).min().unwrap_or(0);
        let n = series.len() as f64;
        let avg: Vec<(f64, f64, f64)> = (0..len)
            .map(|i| {
                let s = series.iter().fold((0.0, 0.0, 0.0), |a, r| (a.0 + r[i].0, a.1 + r[i].1, a.2 + r[i].2));
                (s.0 / n, s.1 / n, s.2 / n)
            })
            .collect();
        let nus: Vec<f64> = avg.iter().map(|r| r.0).collect();
        let moving = moving_average(&nus, MOVING_AVERAGE_WINDOW);
        let mut text = format!("{}\n", learning_curve_header());
        curve_rows(&mut text, &variant, "mean", &avg, (!any_unlearning).then_some(moving.as_slice()), any_unlearning);
        let path = out.join("learning_curve_mean.csv");
        write_file(&path, text)?;
        curve_files.push(path);
    }
    let result = TrainResult { variant, seeds, curve_files };
    write_file(&out.join("train_summary.json"), serde_json::to_string_pretty(&result).expect("summary serializes"))?;
    Ok(result)
}
