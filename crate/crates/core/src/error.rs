use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("{what} = {value} is out of range (max {max})")]
    Range {
        what: &'static str,
        value: usize,
        max: usize,
    },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("invariant violation: {0}")]
    Invariant(String),
    #[error("distribution row has empty support")]
    EmptySupport,
    #[error("domain error: {0}")]
    Domain(String),
    #[error("infeasible constraint: max achievable contribution {max} < target {target}")]
    Infeasible { max: f64, target: f64 },
    #[error("replay error: {0}")]
    Replay(String),
    #[error("analysis error: {0}")]
    Analysis(String),
    #[error("trace error: {0}")]
    Trace(String),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
