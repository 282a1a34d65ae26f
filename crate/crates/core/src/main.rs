use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use fraglab::experiments::{run_to_dir, ExpError, ExperimentConfig, ExperimentKind};

/// Fragmentation-at-nodes experiments: simulation against analytic oracles.
#[derive(Debug, Parser)]
#[command(name = "fraglab", version)]
struct Cli {
    /// convergence | laplace-xval | second-moment | r-law | bertoin | moments | sampler-gof
    experiment: String,
    /// Flat TOML config with `schema = 1`.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for results.csv and manifest.json.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

fn run(cli: &Cli) -> Result<PathBuf, ExpError> {
    let kind: ExperimentKind = cli.experiment.parse()?;
    let cfg = ExperimentConfig::load(&cli.config)?;
    let resolved = cfg.resolve(kind, cli.seed)?;
    let out = cli
        .out
        .clone()
        .or_else(|| cfg.out.clone())
        .unwrap_or_else(|| PathBuf::from("fraglab-out").join(kind.name()));
    run_to_dir(&resolved, &out, cli.threads)?;
    Ok(out)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(out) => {
            println!("wrote {}", out.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("fraglab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
