use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("unstable counter: rho = {rho} (requires rho < 1)")]
    UnstableCounter { rho: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("truncation level {n_max} too small, need at least {required}")]
    Truncation { n_max: usize, required: usize },

    #[error("singular linear system")]
    Singular,

    #[error("root not bracketed: {0}")]
    Bracket(String),

    #[error("infeasible constraint: {0}")]
    InfeasibleConstraint(String),

    #[error("unplaced content: file {file} has demand but no reachable cache stores it")]
    UnplacedContent { file: usize },

    #[error("sink without storage: cache {cache} has no outgoing link but misses file {file}")]
    SinkWithoutStorage { cache: usize, file: usize },

    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
