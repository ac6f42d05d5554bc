use thiserror::Error;

/// Errors raised by the simulation engine.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An input violates the domain of an operation (negative rates,
    /// incommensurate frequencies, missing sidebands, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// Run configuration is inconsistent (step size too large, bad dims).
    #[error("configuration error: {0}")]
    Config(String),

    /// An iterative solver failed to converge.
    #[error("solver did not converge after {iterations} iterations (max residual {residual:.3e})")]
    Solver { iterations: usize, residual: f64 },

    /// Numerical integration failed or produced non-finite values.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// A monitored invariant was violated beyond tolerance.
    #[error("invariant violated at t = {t:.6}: {what}")]
    Invariant { t: f64, what: String },

    /// Population leaked into the top Fock level of a truncated subsystem.
    #[error("truncation leakage at t = {t:.6}: top-level population {population:.3e} in {subsystem}")]
    Leakage {
        t: f64,
        subsystem: &'static str,
        population: f64,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
