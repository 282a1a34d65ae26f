//! Experiment runner behind the `fraglab` binary.

pub mod config;
pub mod output;
pub mod runners;

use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use thiserror::Error;

pub use config::{ExperimentConfig, ExperimentKind, Resolved};
pub use output::{ExperimentManifest, Table};

#[derive(Debug, Error)]
pub enum ExpError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numeric failure: {0}")]
    Numeric(#[from] crate::Error),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for ExpError {
    fn from(e: std::io::Error) -> Self {
        ExpError::Io(e.to_string())
    }
}

impl ExpError {
    pub fn exit_code(&self) -> i32 {
        match self {
            ExpError::Config(_) => 2,
            ExpError::Numeric(_) => 3,
            ExpError::Io(_) => 1,
        }
    }
}

/// Runs the experiment in memory.
pub fn run(r: &Resolved) -> Result<(Table, runners::Streams), ExpError> {
    use ExperimentKind::*;
    match r.experiment {
        Convergence => runners::convergence(r),
        LaplaceXval => runners::laplace_xval(r),
        SecondMoment => runners::second_moment_run(r),
        RLaw => runners::r_law(r),
        Bertoin => runners::bertoin(r),
        Moments => runners::moments(r),
        SamplerGof => runners::sampler_gof(r),
    }
}

/// Runs the experiment on `threads` worker threads (all cores if `None`) and
/// writes `results.csv` and `manifest.json` into `out`.
pub fn run_to_dir(r: &Resolved, out: &Path, threads: Option<usize>) -> Result<ExperimentManifest, ExpError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(k) = threads {
        if k == 0 {
            return Err(ExpError::Config("--threads must be at least 1".into()));
        }
        builder = builder.num_threads(k);
    }
    let pool = builder.build().map_err(|e| ExpError::Config(e.to_string()))?;
    let (table, streams) = pool.install(|| run(r))?;
    let manifest = ExperimentManifest {
        experiment: r.experiment.name().into(),
        artifact: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        timestamp_unix: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
        seed: r.seed,
        streams,
        threads: pool.current_num_threads(),
        config: r.clone(),
        files: Vec::new(),
    };
    output::write_outputs(out, &table, manifest)
}
