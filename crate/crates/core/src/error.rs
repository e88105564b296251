use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// The energy model cannot produce a nondegenerate critical point.
    #[error("invalid model: {0}")]
    InvalidModel(String),
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// A configured size or truncation limit would be exceeded.
    #[error("resource limit: {0}")]
    Resource(String),
    /// The requested finite-N distribution has no atoms.
    #[error("empty support: {0}")]
    EmptySupport(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
