use thiserror::Error;

/// Errors raised by the chains, closed forms and estimators.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("null triangle: all three vertices coincide")]
    NullTriangle,

    #[error("degenerate quadrilateral: zero area")]
    DegenerateQuadrilateral,

    #[error("quadrilateral is not convex")]
    NonConvex,

    #[error("zero displacement")]
    ZeroDisplacement,

    #[error("degenerate child: all new side lengths are zero")]
    DegenerateChild,

    #[error("zero spread: all three abscissae are equal")]
    ZeroSpread,

    #[error("{what} out of domain: {value}")]
    OutOfDomain { what: &'static str, value: f64 },

    #[error("quadrature did not converge: value {value}, error estimate {error_estimate} after {evaluations} evaluations")]
    NonConvergence {
        value: f64,
        error_estimate: f64,
        evaluations: usize,
    },

    #[error("empty sample")]
    EmptySample,

    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("abscissae are all equal")]
    DegenerateAbscissae,

    #[error("slope undefined: {0}")]
    UndefinedSlope(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
