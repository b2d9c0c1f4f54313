use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use xmodal::config::PipelineConfig;
use xmodal::run::{run_stage, Stage};
use xmodal::StageError;

/// Cross-modal weak supervision pipeline.
#[derive(Parser, Debug)]
#[command(version, about)]
struct Cli {
    /// Stage to run.
    #[arg(value_enum, conflicts_with = "stage_flag")]
    stage: Option<Stage>,
    #[arg(long = "stage", value_enum, value_name = "STAGE")]
    stage_flag: Option<Stage>,
    /// TOML pipeline config; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the config seed everywhere.
    #[arg(long)]
    seed: Option<u64>,
    /// Run directory.
    #[arg(long, default_value = "run")]
    out: PathBuf,
    /// Worker threads; defaults to one per core.
    #[arg(long, env = "XMODAL_THREADS")]
    threads: Option<usize>,
}

fn run(cli: Cli) -> Result<(), StageError> {
    let mut config = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(StageError::Config("XMODAL_THREADS must be >= 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| StageError::Runtime(e.into()))?;
    }
    let stage = cli.stage.or(cli.stage_flag).unwrap_or(Stage::RunAll);
    for (s, summary) in run_stage(stage, &config, &cli.out)? {
        eprintln!("{}: {summary}", s.name());
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
