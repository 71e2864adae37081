use thiserror::Error;

/// Errors raised by the CSP state and prompt builders.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CoreError {
    #[error("token surface is empty")]
    EmptyToken,
    #[error("unbounded task: no constraints and no budget")]
    UnboundedTask,
    #[error("previous variable unassigned")]
    PreviousUnassigned,
    #[error("variable {0} is not the newest unassigned variable")]
    NotNewest(usize),
    #[error("variable {0} has no domain")]
    NoDomain(usize),
    #[error("contract violation: token {surface:?} is not in the domain of variable {var}")]
    NotInDomain { var: usize, surface: String },
    #[error("nothing to retract")]
    NothingToRetract,
    #[error("malformed assignment encoding: {0}")]
    MalformedAssignment(String),
    #[error("mask count must be at least 1")]
    NoMasks,
}

/// Failures reported by language-model backends.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BackendError {
    /// Transient failure (rate limiting, server error, transport); the caller may retry.
    #[error("transient backend failure: {0}")]
    Transient(String),
    #[error("backend configuration error: {0}")]
    Config(String),
    #[error("credentials absent: environment variable {0} is not set")]
    Credentials(String),
    #[error("backend protocol error: {message}")]
    Protocol { message: String, raw: String },
    #[error("invalid request: {0}")]
    InvalidRequest(String),
}

/// Errors that abort a search.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SearchError {
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("invalid search configuration: {0}")]
    Config(String),
}

/// Task-file and task-definition errors.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TaskError {
    #[error("task schema error at {location}: {message}")]
    Schema { location: String, message: String },
    #[error("invalid task: {0}")]
    Invalid(String),
}
