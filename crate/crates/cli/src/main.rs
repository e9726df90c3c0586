use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use advice_cloze_cli::config::PipelineConfig;
use advice_cloze_cli::stages::{run_stage, StageName};

/// Build binary-choice cloze tests from advice-seeking forum posts and
/// evaluate a narrative-question similarity baseline on them.
#[derive(Debug, Parser)]
#[command(name = "advice-cloze", version)]
struct Cli {
    /// Pipeline stage to run.
    #[arg(value_enum)]
    stage: StageName,

    /// Pipeline configuration file (JSON). Relative paths inside it are
    /// resolved against its own directory.
    #[arg(long)]
    config: PathBuf,

    /// Override the config's root seed.
    #[arg(long)]
    seed: Option<u64>,

    /// Override the config's stage directory.
    #[arg(long)]
    stage_dir: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let config = match PipelineConfig::load(&cli.config, cli.seed, cli.stage_dir) {
        Ok(config) => config,
        Err(error) => {
            eprintln!("advice-cloze: {error}");
            return ExitCode::from(error.exit_code());
        }
    };
    match run_stage(cli.stage, &config) {
        Ok(()) => ExitCode::SUCCESS,
        Err(error) => {
            eprintln!("advice-cloze: {error}");
            ExitCode::from(error.exit_code())
        }
    }
}
