mod commands;
mod config;
mod error;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

use crate::commands::Context;
use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::manifest::{unix_now, RunManifest, Versions};

#[derive(Parser)]
#[command(
    name = "morphopt",
    version,
    about = "Optimal mesh morphings and O-MMGP surrogates"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Optimizer checkpoint directory to continue from.
    #[arg(long, global = true)]
    resume: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Write the tilted-ridge toy dataset.
    GenToy {
        #[arg(long)]
        n: Option<usize>,
    },
    /// Run the morphing optimizer.
    Optimize,
    /// Eigenvalue decay of the raw and morphed snapshot families.
    Pod {
        /// Checkpoint directory with the morphings.
        #[arg(long)]
        morphings: Option<PathBuf>,
    },
    /// Train a surrogate bundle.
    Train,
    /// Predict a field with a trained bundle.
    Predict {
        #[arg(long)]
        bundle: Option<PathBuf>,
        /// Comma-separated parameters.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        params: Option<Vec<f64>>,
        /// Target geometry (native or legacy VTK mesh).
        #[arg(long)]
        mesh: Option<PathBuf>,
    },
    /// Leave-one-out or held-out evaluation.
    Eval {
        #[arg(long)]
        bundle: Option<PathBuf>,
    },
    /// Continue an optimizer run from --resume.
    CheckpointResume,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::GenToy { .. } => "gen-toy",
            Command::Optimize => "optimize",
            Command::Pod { .. } => "pod",
            Command::Train => "train",
            Command::Predict { .. } => "predict",
            Command::Eval { .. } => "eval",
            Command::CheckpointResume => "checkpoint-resume",
        }
    }
}

fn build_context(cli: &Cli) -> CliResult<Context> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(w) = cli.workers {
        config.workers = w;
    }
    if let Some(s) = cli.seed {
        config.seed = s;
    }
    if let Some(o) = &cli.out {
        config.out = Some(o.clone());
    }
    if let Command::GenToy { n: Some(n) } = cli.command {
        config.toy.n = n;
    }
    let out = config.out.clone().unwrap_or_else(|| PathBuf::from("out"));
    Ok(Context {
        config,
        out,
        resume: cli.resume.clone(),
    })
}

fn run(cli: &Cli, ctx: &Context) -> CliResult<()> {
    if ctx.config.workers > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(ctx.config.workers)
            .build_global()
            .map_err(|e| CliError::Usage(format!("cannot start worker pool: {e}")))?;
    }
    match &cli.command {
        Command::GenToy { .. } => commands::gen_toy(ctx),
        Command::Optimize => commands::optimize(ctx),
        Command::Pod { morphings } => commands::pod(ctx, morphings.as_ref()),
        Command::Train => commands::train_cmd(ctx),
        Command::Predict {
            bundle,
            params,
            mesh,
        } => commands::predict(ctx, bundle.as_ref(), params.as_ref(), mesh.as_ref()),
        Command::Eval { bundle } => commands::eval(ctx, bundle.as_ref()),
        Command::CheckpointResume => commands::checkpoint_resume(ctx),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("MORPHOPT_LOG", "warn")).init();
    let cli = Cli::parse();
    let ctx = match build_context(&cli) {
        Ok(ctx) => ctx,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let started_at = unix_now();
    let clock = Instant::now();
    let result = run(&cli, &ctx);
    let exit_code = result.as_ref().err().map_or(0, CliError::exit_code);
    if let Err(e) = &result {
        eprintln!("error: {e}");
    }
    let manifest = RunManifest {
        command: cli.command.name().into(),
        config_hash: ctx.config.hash(),
        seed: ctx.config.seed,
        workers: ctx.config.workers,
        versions: Versions::default(),
        started_at,
        wall_time_s: clock.elapsed().as_secs_f64(),
        exit_code,
        error: result.as_ref().err().map(ToString::to_string),
    };
    if let Err(e) = manifest.write(&ctx.out) {
        eprintln!("warning: could not write run manifest: {e}");
    }
    ExitCode::from(exit_code as u8)
}
