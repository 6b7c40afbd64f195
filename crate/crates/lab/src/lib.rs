//! Configuration-driven scenarios on top of `halfspace`: the two Dirichlet
//! problems, the seminorm equivalence table, reconstruction from slices,
//! the logarithmic counterexample and the John–Nirenberg demonstrations.

use std::path::PathBuf;
use std::time::Instant;

use rayon::prelude::*;
use thiserror::Error;

pub mod config;
pub mod report;
pub mod scenarios;

pub use config::{Config, Inputs, Named, SweepSpec};
pub use report::{Check, RunManifest, ScenarioReport, Table, Verdict};
pub use scenarios::Scenario;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("config: {0}")]
    Config(#[from] toml::de::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Growth(#[from] halfspace::growthfn::GrowthError),
    #[error(transparent)]
    Elliptic(#[from] halfspace::elliptic::EllipticError),
    #[error(transparent)]
    Poisson(#[from] halfspace::poisson::PoissonError),
    #[error(transparent)]
    Extension(#[from] halfspace::extension::ExtensionError),
    #[error(transparent)]
    Dyadic(#[from] halfspace::dyadic::DyadicError),
    #[error("scenario `{scenario}`: {reason}")]
    Unsupported { scenario: String, reason: String },
    #[error("worker pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
}

/// Runs every scenario of `cfg` and returns the reports with their wall
/// clock, in configuration order. Output names are made unique by
/// appending the scenario index when needed.
pub fn run_scenarios(cfg: &Config) -> Result<Vec<(ScenarioReport, f64)>, LabError> {
    let inputs = Inputs::from_config(cfg);
    let names = scenario_names(&cfg.scenarios);
    let pool = rayon::ThreadPoolBuilder::new().num_threads(cfg.workers).build()?;
    pool.install(|| {
        cfg.scenarios
            .par_iter()
            .zip(names.par_iter())
            .map(|(s, name)| {
                let start = Instant::now();
                let r = s.run(name, &inputs)?;
                Ok((r, start.elapsed().as_secs_f64()))
            })
            .collect()
    })
}

fn scenario_names(list: &[Scenario]) -> Vec<String> {
    let base: Vec<String> = list.iter().map(|s| s.name()).collect();
    base.iter()
        .enumerate()
        .map(|(i, b)| {
            if base.iter().filter(|x| *x == b).count() > 1 {
                format!("{b}{i}")
            } else {
                b.clone()
            }
        })
        .collect()
}

/// Runs `cfg` and writes its outputs and manifest into `cfg.out_dir`.
pub fn run(cfg: &Config) -> Result<RunManifest, LabError> {
    let reports = run_scenarios(cfg)?;
    let hash = report::sha256_hex(cfg.canonical_json().as_bytes());
    let with_time: Vec<(ScenarioReport, Option<f64>)> = reports
        .into_iter()
        .map(|(r, s)| (r, cfg.record_timings.then_some(s)))
        .collect();
    report::emit_report(&cfg.out_dir, &hash, cfg.seed, &with_time, cfg.plots)
}
