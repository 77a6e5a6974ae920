use thiserror::Error;

use crate::simulator::EventLog;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid kernel: {0}")]
    InvalidKernel(String),

    #[error("subcritical input: p*Lambda = {0} <= 1, growth exponent undefined")]
    SubcriticalInput(f64),

    #[error("regime error: Lambda*p = {0} >= 1 where a subcritical system is required")]
    Regime(f64),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("first moment of the tabulated kernel does not converge over its grid")]
    NonConvergentMoment,

    #[error("graph is not irreducible: {0}")]
    NotIrreducible(String),

    #[error("power iteration did not converge within {iterations} iterations")]
    Convergence { iterations: usize },

    #[error("singular linear system")]
    Singular,

    #[error("resolvent has a non-positive entry; the graph is not subcritical for Lambda = {0}")]
    NotSubcriticalGraph(f64),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("event cap of {cap} exceeded at t = {time}")]
    Explosion {
        cap: usize,
        time: f64,
        partial: Box<EventLog>,
    },

    #[error("unsupported kernel: {0}")]
    UnsupportedKernel(String),

    #[error("out of range: {0}")]
    Range(String),

    #[error("schedule error: {0}")]
    Schedule(String),

    #[error("oracle scale exceeded: N = {0} > {max}", max = crate::simulator::ORACLE_MAX_N)]
    Scale(usize),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("configuration warning: {0}")]
    ConfigWarning(String),
}

impl Error {
    /// Short machine-readable category, used as the error-line prefix by front ends.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Convergence { .. } => "convergence",
            Error::Explosion { .. } => "explosion",
            Error::Precondition(_) | Error::ConfigWarning(_) | Error::InvalidKernel(_) => "config",
            _ => "domain",
        }
    }
}
