use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{name} = {value} is outside its domain ({expected})")]
    Domain {
        name: &'static str,
        value: f64,
        expected: &'static str,
    },
    #[error("quadrature on [{lo}, {hi}] did not reach tolerance: estimate {estimate}, error {error}")]
    Quadrature {
        lo: f64,
        hi: f64,
        estimate: f64,
        error: f64,
    },
    #[error("non-finite integrand value at x = {x}")]
    NonFinite { x: f64 },
    #[error("no sign change for {what}: {detail}")]
    NoBracket { what: &'static str, detail: String },
    #[error("{what} did not converge after {iterations} iterations (residual {residual})")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },
    #[error("{what} left its real domain: {detail}")]
    OutOfDomain { what: &'static str, detail: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn domain<T: crate::Real>(name: &'static str, value: T, expected: &'static str) -> Error {
    Error::Domain {
        name,
        value: crate::scalar::to_f64(value),
        expected,
    }
}
