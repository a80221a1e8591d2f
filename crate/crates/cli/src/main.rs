use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rbcflow_api::{ErrorKind, JobRequest, JobStatus};
use rbcflow_client::Client;
use rbcflow_core::lab::{ExperimentConfig, TrainResult, VerifyOptions, VerifyReport};
use rbcflow_core::nets::ActMode;

const USAGE: u8 = 2;
const FAILURE: u8 = 1;

#[derive(Parser)]
#[command(name = "rbcflow", version, about = "Reinforcement-learning control of Rayleigh-Benard convection")]
struct Cli {
    /// Job service URL; an in-process service is started when omitted.
    #[arg(long, global = true)]
    server: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the uncontrolled flow and store the starting snapshot.
    Baseline(Common),
    /// Train every seed and write learning curves.
    Train(TrainArgs),
    /// Run one episode with a checkpointed policy.
    Evaluate(EvaluateArgs),
    /// Physics, invariance and gradient checks.
    Verify(VerifyArgs),
    /// Render learning curves and action histories.
    Plot(PlotArgs),
    /// Run the job service in the foreground.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        bind: String,
    },
}

#[derive(Args)]
struct Common {
    /// Experiment configuration (TOML); defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Run directory; overrides `run.out_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    common: Common,
    /// Comma-separated seeds; overrides `run.seeds`.
    #[arg(long, value_delimiter = ',')]
    seed: Vec<u64>,
    /// Train seeds concurrently.
    #[arg(long)]
    parallel: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Stochastic,
    Deterministic,
}

#[derive(Args)]
struct EvaluateArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long, value_enum, default_value = "deterministic")]
    mode: Mode,
    /// Comma-separated action-sampling seeds, one episode each.
    #[arg(long, value_delimiter = ',', default_value = "0")]
    seed: Vec<u64>,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    common: Common,
    /// Include the reduced-scale learning runs.
    #[arg(long)]
    long: bool,
    #[arg(long, default_value_t = 50)]
    long_episodes: usize,
}

#[derive(Args)]
struct PlotArgs {
    /// Run directories containing learning_curve_*.csv.
    #[arg(required = true)]
    runs: Vec<PathBuf>,
    #[arg(long, default_value = "plots")]
    out: PathBuf,
}

struct Exit(u8, String);

fn absolute(p: &Path) -> Result<PathBuf, Exit> {
    std::path::absolute(p).map_err(|e| Exit(USAGE, format!("{}: {e}", p.display())))
}

fn load(common: &Common) -> Result<(ExperimentConfig, PathBuf), Exit> {
    let cfg = match &common.config {
        Some(path) => ExperimentConfig::load(path).map_err(|e| Exit(USAGE, e.to_string()))?,
        None => ExperimentConfig::default(),
    };
    let out = absolute(common.out.as_ref().unwrap_or(&cfg.run.out_dir))?;
    Ok((cfg, out))
}

fn requests(command: &Command) -> Result<Vec<JobRequest>, Exit> {
    Ok(match command {
        Command::Baseline(c) => {
            let (config, out) = load(c)?;
            vec![JobRequest::Baseline { config, out }]
        }
        Command::Train(a) => {
            let (mut config, out) = load(&a.common)?;
            if !a.seed.is_empty() {
                config.run.seeds = a.seed.clone();
            }
            config.run.parallel_seeds |= a.parallel;
            config.run.out_dir = out.clone();
            vec![JobRequest::Train { config, out }]
        }
        Command::Evaluate(a) => {
            let (config, out) = load(&a.common)?;
            let checkpoint = absolute(&a.checkpoint)?;
            let mode = match a.mode {
                Mode::Stochastic => ActMode::Stochastic,
                Mode::Deterministic => ActMode::Deterministic,
            };
            let seeds = if matches!(mode, ActMode::Deterministic) { &a.seed[..1] } else { &a.seed[..] };
            seeds
                .iter()
                .map(|&seed| JobRequest::Evaluate {
                    config: config.clone(),
                    checkpoint: checkpoint.clone(),
                    mode,
                    seed,
                    out: out.clone(),
                })
                .collect()
        }
        Command::Verify(a) => {
            let (config, _) = load(&a.common)?;
            let out = a.common.out.as_deref().map(absolute).transpose()?;
            let options = VerifyOptions { long: a.long, long_episodes: a.long_episodes, ..VerifyOptions::default() };
            vec![JobRequest::Verify { config, options, out }]
        }
        Command::Plot(a) => {
            let runs = a.runs.iter().map(|r| absolute(r)).collect::<Result<_, _>>()?;
            vec![JobRequest::Plot { runs, out: absolute(&a.out)? }]
        }
        Command::Serve { .. } => Vec::new(),
    })
}

/// Exit status implied by a finished job's output.
fn judge(request: &JobRequest, result: &serde_json::Value) -> Result<(), Exit> {
    match request {
        JobRequest::Verify { .. } => {
            let report: VerifyReport = serde_json::from_value(result.clone()).map_err(|e| Exit(FAILURE, e.to_string()))?;
            print!("{}", report.render());
            if let Some(ra) = report.critical_rayleigh {
                println!("critical Rayleigh number {ra:.2} ({:+.2}% from 1708)", (ra / 1708.0 - 1.0) * 100.0);
            }
            if !report.passed() {
                return Err(Exit(FAILURE, "verification failed".into()));
            }
        }
        JobRequest::Train { .. } => {
            let summary: TrainResult = serde_json::from_value(result.clone()).map_err(|e| Exit(FAILURE, e.to_string()))?;
            println!("{}", serde_json::to_string_pretty(result).unwrap_or_default());
            if let Some(s) = summary.seeds.iter().find(|s| s.error.is_some()) {
                return Err(Exit(FAILURE, format!("seed {} failed: {}", s.seed, s.error.clone().unwrap_or_default())));
            }
        }
        _ => println!("{}", serde_json::to_string_pretty(result).unwrap_or_default()),
    }
    Ok(())
}

async fn execute(client: &Client, requests: &[JobRequest]) -> Result<(), Exit> {
    for request in requests {
        let job = client
            .run(request, Duration::from_millis(200))
            .await
            .map_err(|e| Exit(FAILURE, e.to_string()))?;
        match (job.status, job.result, job.error) {
            (JobStatus::Succeeded, Some(result), _) => judge(request, &result)?,
            (_, _, Some(err)) => {
                let code = if err.kind == ErrorKind::Usage { USAGE } else { FAILURE };
                return Err(Exit(code, err.message));
            }
            (status, _, _) => return Err(Exit(FAILURE, format!("job ended as {status:?} without output"))),
        }
    }
    Ok(())
}

async fn main_async(cli: Cli) -> Result<(), Exit> {
    if let Command::Serve { bind } = &cli.command {
        let listener = tokio::net::TcpListener::bind(bind).await.map_err(|e| Exit(USAGE, format!("cannot bind {bind}: {e}")))?;
        let addr = listener.local_addr().map_err(|e| Exit(FAILURE, e.to_string()))?;
        eprintln!("listening on http://{addr}");
        return rbcflow_server::serve(listener).await.map_err(|e| Exit(FAILURE, e.to_string()));
    }
    let requests = requests(&cli.command)?;
    let client = match &cli.server {
        Some(url) => Client::new(url.clone()),
        None => {
            let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.map_err(|e| Exit(FAILURE, e.to_string()))?;
            let addr = listener.local_addr().map_err(|e| Exit(FAILURE, e.to_string()))?;
            tokio::spawn(rbcflow_server::serve(listener));
            Client::new(format!("http://{addr}"))
        }
    };
    execute(&client, &requests).await
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_env("RBCFLOW_LOG").unwrap_or_else(|_| "warn".into()))
        .with_writer(std::io::stderr)
        .init();
    let runtime = match tokio::runtime::Runtime::new() {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(FAILURE);
        }
    };
    match runtime.block_on(main_async(cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Exit(code, message)) => {
            eprintln!("error: {message}");
            ExitCode::from(code)
        }
    }
}
