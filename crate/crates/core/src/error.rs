use thiserror::Error;

/// Failure classes; the CLI maps each to an exit code.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain violation: {0}")]
    Domain(String),

    #[error("interface trace: coefficient is multivalued at x = {x} (interface at {gamma}, t = {t})")]
    InterfaceTrace { x: f64, t: f64, gamma: f64 },

    #[error("configuration: {0}")]
    Config(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("discrete instability: {reason} (n_x = {n_x}, n_t = {n_t}, dim = {dim})")]
    Instability {
        reason: String,
        n_x: usize,
        n_t: usize,
        dim: usize,
    },

    #[error("internal inconsistency: {0}")]
    Internal(String),
}

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Self::Domain(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Self::Config(msg.into())
    }

    pub fn numerical(msg: impl Into<String>) -> Self {
        Self::Numerical(msg.into())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
