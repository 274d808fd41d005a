//! Numeric backends and exact one-dimensional piecewise-linear algebra.

pub mod bounds;
pub mod pwl;
pub mod scalar;

pub use bounds::{dyadic_ceil, dyadic_floor, pow2_floor, pow_enclosure, root_enclosure, Enclosure, ENCLOSURE_BITS};
pub use pwl::{pwl_eval, pwl_max_on, pwl_of_net, pwl_of_net_on, ExactPwl, PiecewiseLinear1D};
pub use scalar::{parse_rational, pow2, q, qint, Backend, Field, Scalar, Q};

use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum NumericsError {
    #[error("backend mismatch: {left} vs {right}")]
    BackendMismatch { left: Backend, right: Backend },
    #[error("division by zero")]
    DivisionByZero,
    #[error("non-finite value")]
    NonFinite,
    #[error("cannot parse rational {0:?} (expected p/q)")]
    Parse(String),
    #[error("empty interval")]
    EmptyInterval,
    #[error("symbolic flattening requires exact weights")]
    FloatBackend,
    #[error("network is not scalar-to-scalar ({inputs} inputs, {outputs} outputs)")]
    NotScalar { inputs: usize, outputs: usize },
    #[error("flattening exceeded {limit} breakpoints")]
    TooManyBreakpoints { limit: usize },
    #[error("height {height} exceeds flattening limit {limit}")]
    HeightLimit { height: usize, limit: usize },
    #[error("invalid piecewise-linear function: {0}")]
    InvalidPwl(String),
    #[error("invalid network: {0}")]
    InvalidNet(String),
}
