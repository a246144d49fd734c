use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use risestim::harness::{self, ExperimentConfig, ExperimentKind, HarnessError};

/// Run a RIS channel-estimation experiment and write its results as CSV.
#[derive(Debug, Parser)]
#[command(name = "risestim", version)]
struct Cli {
    /// narrowband-mse, spectral-efficiency, optimal-size, sparse, ofdm,
    /// multiuser or opportunistic
    experiment: String,

    /// JSON experiment configuration
    #[arg(long)]
    config: PathBuf,

    /// Overrides the configured seed
    #[arg(long)]
    seed: Option<u64>,

    /// Overrides the configured trial count
    #[arg(long)]
    trials: Option<usize>,

    /// Directory for the CSV (keeps the configured file name)
    #[arg(long)]
    out: Option<PathBuf>,
}

fn load(cli: &Cli) -> Result<ExperimentConfig, HarnessError> {
    let kind: ExperimentKind = cli
        .experiment
        .parse()
        .map_err(|e: String| HarnessError::Config(vec![e]))?;
    let mut config = ExperimentConfig::load(&cli.config)?;
    match config.experiment {
        Some(k) if k != kind => {
            return Err(HarnessError::Config(vec![format!(
                "experiment: config is for `{k}` but `{kind}` was requested"
            )]))
        }
        _ => config.experiment = Some(kind),
    }
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(trials) = cli.trials {
        config.trials = trials;
    }
    Ok(config)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = load(&cli).and_then(|config| {
        let path = config.output_path(cli.out.as_deref());
        let records = harness::run_to_file(&config, &path)?;
        Ok((path, records.len()))
    });
    match result {
        Ok((path, rows)) => {
            eprintln!("wrote {rows} rows to {}", path.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("risestim: {e}");
            ExitCode::from(if e.is_config() { 2 } else { 1 })
        }
    }
}
