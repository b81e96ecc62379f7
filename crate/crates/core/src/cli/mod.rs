//! Scenario configuration, orchestration and artifacts.
//!
//! A run directory holds:
//! - `reports.jsonl`: a header object `{scenario, master_seed, config_sha256}`,
//!   then one [`CheckReport`](crate::checks::CheckReport) object per line;
//! - `summary.txt`: the fixed-width table and expected/observed outcomes;
//! - `provenance.toml`: the resolved config behind a comment header, which
//!   reruns the scenario as is;
//! - `paths.jsonl` (`dump_paths`): header object, then
//!   `{path_index, tau, c0, c1, c2, c3}` per recorded step;
//! - `density.csv` (`dump_grid`): `# header`, then the grid export.

pub mod config;
pub mod run;
pub mod scenarios;

#[cfg(test)]
mod tests;

use std::path::PathBuf;

use thiserror::Error;

pub use config::{
    load_config, load_config_str, schema, CheckName, ConfigError, ConfigSource, ScenarioConfig,
};
pub use run::{config_hash, evaluate, evaluate_check, run, simulate, Outcome, RunSummary};
pub use scenarios::{builtin, list_scenarios, BUILTINS};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "STOCHASTIC_ELECTRON_OUT";

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("scenario `{scenario}`: {source}")]
    Run {
        scenario: String,
        source: crate::Error,
    },
    #[error("scenario `{scenario}`, check `{check}`: {source}")]
    Check {
        scenario: String,
        check: CheckName,
        source: crate::Error,
    },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("unknown builtin scenario `{0}`")]
    UnknownBuiltin(String),
}
