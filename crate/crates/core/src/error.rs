use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration; `path` names the offending field.
    #[error("{path}: {msg}")]
    Config { path: String, msg: String },
    #[error("demand: {0}")]
    Demand(String),
    #[error("model construction: {0}")]
    Model(String),
    #[error("solver: {0}")]
    Solve(String),
    #[error("internal consistency: {0}")]
    Internal(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse: {0}")]
    Parse(String),
}
