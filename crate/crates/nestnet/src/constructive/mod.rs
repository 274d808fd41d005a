//! Builders for the constructive networks: continuous piecewise-linear realizations, min/max/mid,
//! floor and step networks, bit extraction, point fitting, and the full approximator.

mod approx;
mod basic;
mod bits;
mod builder;
mod fit;
mod floor;
mod target;

pub use approx::{
    approximator_full, approximator_full_with, approximator_interior, g_builder, grid_side, psi1_map, Approximator,
    ApproximatorParts, PNorm,
};
pub use basic::{cpl_to_net, max_pair_net, mid_net, min_pair_net};
pub use bits::{bit_extract_base, bit_extract_net, bit_extract_net_with, bit_pair_net, indexed_bit_sum_net};
pub use fit::{point_fit_net, point_fit_net_with, point_fit_targets};
pub use floor::{
    floor_base, floor_nested, floor_nested_with, phi1_grid_net, step_function_net, step_function_net_with,
    steps_exponent,
};
pub use target::{ModulusSpec, TargetFunction, TriflingRegion};

use thiserror::Error;

use crate::ir::IrError;
use crate::numerics::NumericsError;

/// Caps on the sizes a build may reach before it is refused.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BuildLimits {
    /// Most steps a floor or step network may realize.
    pub max_steps: u64,
    /// Most points a point-fitting network may interpolate.
    pub max_points: u64,
    /// Most bits a bit-extraction network may decode.
    pub max_bits: u64,
    /// Largest input dimension for the sup-norm approximator.
    pub max_infinity_dim: usize,
}

impl Default for BuildLimits {
    fn default() -> Self {
        Self { max_steps: 1 << 12, max_points: 1 << 12, max_bits: 1 << 12, max_infinity_dim: 3 }
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ConstructError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("resource guard: {what} = {value} exceeds limit {limit}")]
    ResourceGuard { what: &'static str, value: String, limit: u64 },
    #[error("gap condition violated at index {index}: |y_j - y_(j-1)| > eps")]
    GapViolated { index: usize },
    #[error("modulus of continuity is inconsistent with the target: {0}")]
    InconsistentModulus(String),
    #[error("dimension mismatch: {0}")]
    DimMismatch(String),
    #[error(transparent)]
    Ir(#[from] IrError),
    #[error(transparent)]
    Numeric(#[from] NumericsError),
}

pub(crate) fn invalid(msg: impl Into<String>) -> ConstructError {
    ConstructError::InvalidParameter(msg.into())
}
