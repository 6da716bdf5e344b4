//! Error type shared by every module of the crate.

use thiserror::Error;

/// Errors raised by the solver, the policy, the environments, and the harness.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An input that must be finite was NaN or infinite.
    #[error("non-finite input: {0}")]
    NonFiniteInput(String),

    /// An input was outside the operation's domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// The multiplier root-finder ran out of iterations before meeting the tolerance.
    #[error("no convergence after {iterations} iterations (residual {residual:e}, tol {tol:e})")]
    NoConvergence {
        iterations: usize,
        residual: f64,
        tol: f64,
    },

    /// Two or more arms share the minimal mean loss.
    #[error("no unique best arm: arms {0:?} share the minimal mean")]
    NonUniqueBestArm(Vec<usize>),

    /// An environment failed one of the checks `run` requires before play.
    #[error("precondition failed: {0}")]
    PreconditionFailed(String),

    /// A Monte-Carlo repetition failed.
    #[error("repetition {rep}: {source}")]
    Rep {
        rep: usize,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

pub(crate) fn ensure_finite(name: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFiniteInput(format!("{name} = {v}")))
    }
}
