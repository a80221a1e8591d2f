use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{collect_rollout, compute_gae, update, PpoError, PpoHyper, RolloutBuffer, UpdateReport};
use crate::env::MarlEnv;
use crate::grad::Adam;
use crate::nets::{save_checkpoint, ActMode, NetworkSpec, PolicyParams};

pub const TRAINING_CSV_HEADER: &str = "episode,mean_nu,final_nu,mean_reward,clip_fraction,approx_kl,wall_seconds";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    /// One-based episode number.
    pub episode: usize,
    pub mean_nu: f64,
    pub final_nu: f64,
    pub mean_reward: f64,
    pub clip_fraction: f64,
    pub approx_kl: f64,
    pub wall_seconds: f64,
    pub blow_up: bool,
}

impl EpisodeRecord {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.episode, self.mean_nu, self.final_nu, self.mean_reward, self.clip_fraction, self.approx_kl, self.wall_seconds
        )
    }
}

/// Trailing mean over the last `window` entries (fewer at the start).
pub fn moving_average(values: &[f64], window: usize) -> Vec<f64> {
    let window = window.max(1);
    (0..values.len())
        .map(|i| {
            let lo = (i + 1).saturating_sub(window);
            values[lo..=i].iter().sum::<f64>() / (i + 1 - lo) as f64
        })
        .collect()
}

/// Derive an independent stream from the master seed.
fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Training state: environment, shared policy, optimizers and random streams.
pub struct Trainer {
    env: MarlEnv,
    params: PolicyParams,
    actor_opt: Adam,
    critic_opt: Adam,
    hyper: PpoHyper,
    act_rng: ChaCha8Rng,
    shuffle_rng: ChaCha8Rng,
    episodes_done: usize,
}

impl Trainer {
    pub fn new(env: MarlEnv, spec: &NetworkSpec, hyper: PpoHyper, seed: u64) -> Result<Self, PpoError> {
        let columns = env.config().probe_columns;
        let params = PolicyParams::init(spec, [crate::solver::CHANNELS, crate::solver::PROBE_ROWS, columns], seed)?;
        Self::with_params(env, params, hyper, seed)
    }

    pub fn with_params(env: MarlEnv, params: PolicyParams, hyper: PpoHyper, seed: u64) -> Result<Self, PpoError> {
        hyper.validate()?;
        let actor_opt = Adam::new(&params.actor, hyper.learning_rate);
        let critic_opt = Adam::new(&params.critic, hyper.learning_rate);
        Ok(Self {
            env,
            params,
            actor_opt,
            critic_opt,
            hyper,
            act_rng: stream(seed, 1),
            shuffle_rng: stream(seed, 2),
            episodes_done: 0,
        })
    }

    pub fn params(&self) -> &PolicyParams {
        &self.params
    }

    pub fn env(&self) -> &MarlEnv {
        &self.env
    }

    pub fn episodes_done(&self) -> usize {
        self.episodes_done
    }

    /// Collect up to `max_episodes` episodes and update on them.
    pub fn iterate(&mut self, max_episodes: usize) -> Result<(RolloutBuffer, Option<UpdateReport>), PpoError> {
        let hyper = PpoHyper { episodes_per_update: self.hyper.episodes_per_update.min(max_episodes).max(1), ..self.hyper.clone() };
        let mut buffer = collect_rollout(&mut self.env, &self.params, &hyper, ActMode::Stochastic, &mut self.act_rng)?;
        self.episodes_done += buffer.episodes.len();
        if buffer.is_empty() {
            return Ok((buffer, None));
        }
        compute_gae(&mut buffer, &hyper)?;
        let report = update(&mut self.params, &mut self.actor_opt, &mut self.critic_opt, &buffer, &hyper, &mut self.shuffle_rng)?;
        Ok((buffer, Some(report)))
    }
}

/// CSV log, JSON-lines event stream and checkpoint directory of one run.
pub struct TrainLogWriter {
    dir: PathBuf,
    csv: BufWriter<File>,
    events: BufWriter<File>,
    pub record_wall_time: bool,
    /// Keep a numbered checkpoint every this many episodes (0 disables).
    pub checkpoint_every: usize,
}

impl TrainLogWriter {
    pub fn create(dir: &Path) -> Result<Self, PpoError> {
        std::fs::create_dir_all(dir.join("checkpoints"))?;
        let mut csv = BufWriter::new(File::create(dir.join("training.csv"))?);
        writeln!(csv, "{TRAINING_CSV_HEADER}")?;
        csv.flush()?;
        let events = BufWriter::new(File::create(dir.join("events.jsonl"))?);
        Ok(Self { dir: dir.to_path_buf(), csv, events, record_wall_time: false, checkpoint_every: 0 })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn record(&mut self, rec: &EpisodeRecord) -> Result<(), PpoError> {
        writeln!(self.csv, "{}", rec.csv_row())?;
        self.csv.flush()?;
        Ok(())
    }

    pub fn event(&mut self, value: &serde_json::Value) -> Result<(), PpoError> {
        writeln!(self.events, "{value}")?;
        self.events.flush()?;
        Ok(())
    }

    pub fn checkpoint(&self, params: &PolicyParams, name: &str) -> Result<PathBuf, PpoError> {
        let path = self.dir.join("checkpoints").join(name);
        save_checkpoint(params, &path)?;
        Ok(path)
    }
}

/// Alternate rollouts and updates until `episodes` episodes have run.
pub fn train(trainer: &mut Trainer, episodes: usize, mut log: Option<&mut TrainLogWriter>) -> Result<Vec<EpisodeRecord>, PpoError> {
    let mut records = Vec::with_capacity(episodes);
    let started = Instant::now();
    let wall = log.as_ref().is_some_and(|l| l.record_wall_time);
    while trainer.episodes_done() < episodes {
        let remaining = episodes - trainer.episodes_done();
        let (buffer, report) = match trainer.iterate(remaining) {
            Ok(r) => r,
            Err(e) => {
                if let Some(log) = log.as_deref_mut() {
                    log.event(&serde_json::json!({ "event": "abort", "episode": trainer.episodes_done(), "error": e.to_string() }))?;
                    if matches!(e, PpoError::Numerical { .. }) {
                        log.checkpoint(trainer.params(), "pre_update_abort.ckpt")?;
                    }
                }
                return Err(e);
            }
        };
        let first = trainer.episodes_done() - buffer.episodes.len();
        let (clip_fraction, approx_kl) = report.as_ref().map(|r| (r.clip_fraction, r.approx_kl)).unwrap_or((0.0, 0.0));
        for (k, ep) in buffer.episodes.iter().enumerate() {
            let rec = EpisodeRecord {
                episode: first + k + 1,
                mean_nu: ep.mean_nu,
                final_nu: ep.final_nu,
                mean_reward: ep.mean_reward,
                clip_fraction,
                approx_kl,
                wall_seconds: if wall { started.elapsed().as_secs_f64() } else { 0.0 },
                blow_up: ep.blow_up,
            };
            if let Some(log) = log.as_deref_mut() {
                log.record(&rec)?;
                if ep.blow_up {
                    log.event(&serde_json::json!({ "event": "blow_up", "episode": rec.episode, "steps": ep.steps }))?;
                }
            }
            records.push(rec);
        }
        if let Some(log) = log.as_deref_mut() {
            let episode = trainer.episodes_done();
            log.event(&serde_json::json!({ "event": "update", "episode": episode, "report": report }))?;
            log.checkpoint(trainer.params(), "latest.ckpt")?;
            if log.checkpoint_every > 0 && episode % log.checkpoint_every == 0 {
                log.checkpoint(trainer.params(), &format!("episode_{episode:05}.ckpt"))?;
            }
        }
    }
    if let Some(log) = log {
        log.checkpoint(trainer.params(), "final.ckpt")?;
    }
    Ok(records)
}
