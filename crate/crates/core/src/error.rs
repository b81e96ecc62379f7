use thiserror::Error;

use crate::spacetime::FourVector;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite four-vector components {0}")]
    NonFinite(String),

    #[error("invalid physical constant: {0}")]
    InvalidConstant(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("wave function `{model}` cannot be paired with potential `{potential}`")]
    IncompatiblePair { model: String, potential: String },

    #[error("interference node at {x:?}: |phi| = {modulus:e}")]
    NodeSingularity { x: FourVector, modulus: f64 },

    #[error("invalid simulation setup: {0}")]
    InvalidSimulation(String),

    #[error("{aborted} of {total} paths hit a node (limit 0.1%)")]
    TooManyAborts { aborted: usize, total: usize },

    #[error("need at least {needed} tau slices, have {have}")]
    InsufficientSlices { needed: usize, have: usize },

    #[error("every bin is masked for the log-density")]
    AllBinsMasked,

    #[error("grid axes do not match: {0}")]
    AxesMismatch(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error(transparent)]
    Config(#[from] crate::cli::config::ConfigError),

    #[error("scenario `{scenario}`: {source}")]
    Scenario {
        scenario: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn in_scenario(self, scenario: &str) -> Error {
        Error::Scenario {
            scenario: scenario.to_string(),
            source: Box::new(self),
        }
    }
}
