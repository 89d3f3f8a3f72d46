use thiserror::Error;

/// Errors raised by the detection workbench.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("argument outside the function domain: {0}")]
    Domain(String),

    /// Adaptive quadrature hit its refinement limit. The best available
    /// estimate is attached so callers can decide whether it is usable.
    #[error("quadrature did not converge: estimate {estimate:e}, error estimate {error:e}")]
    NonConvergence { estimate: f64, error: f64 },

    #[error("no sign change on bracket [{lo}, {hi}]")]
    NoSignChange { lo: f64, hi: f64 },

    #[error("transmit level m0 = {m0} lies outside the power box |m0| <= {limit}")]
    InfeasibleLevel { m0: f64, limit: f64 },

    #[error("degenerate sensor rule: {0}")]
    DegenerateRule(String),

    #[error("degenerate sensor rates: pf = pd = {0}")]
    DegenerateRates(f64),

    #[error("integration grid: {0}")]
    Grid(String),

    #[error("unsupported system: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::InvalidParameter(msg()))
    }
}
