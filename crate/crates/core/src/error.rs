use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("non-finite spin state at t = {time} s (node {node})")]
    NonFinite { time: f64, node: usize },

    #[error("step {dt} s exceeds the RK4 stability limit {limit} s for the fastest rate")]
    UnstableStep { dt: f64, limit: f64 },

    #[error("kernel `{0}` requires a uniform energy grid")]
    KernelGrid(&'static str),

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("fit did not converge after {iterations} iterations")]
    NonConvergence { iterations: usize },

    #[error("data show no decay (fitted 1/e time is unbounded)")]
    NonDecaying,

    #[error("no revival: contrast has no local maximum after a local minimum")]
    NoRevival,

    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
