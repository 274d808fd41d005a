//! Measurement and oracle harness: grid error norms, parameter budgets, exhaustive bit checks and
//! the scaling study.

mod budget;
mod contracts;
mod grid;
mod oracle;
mod scaling;
mod structured;

pub use budget::{budget_for, check_param_bound, BoundCheck, BoundId};
pub use contracts::{
    check_floor_contract, check_point_fit, check_step_contract, five_points, random_walk, ContractReport,
    PointFitReport,
};
pub use grid::{guaranteed_bound, measure_error, ErrorDecomposition, ErrorReport, GridMode, GridSpec};
pub use oracle::{
    exhaustive_bit_check, exhaustive_bit_check_with, max_cases_from_env, oracle_bit_sum, BitCheckReport,
    DEFAULT_MAX_CASES, MAX_CASES_ENV,
};
pub use scaling::{scaling_study, ScalingRow, ScalingStudy};
pub use structured::measure_approximator;

use thiserror::Error;

use crate::constructive::ConstructError;
use crate::ir::IrError;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum VerifyError {
    #[error("dimension mismatch: network takes {net} inputs, target takes {target}")]
    DimMismatch { net: usize, target: usize },
    #[error("unknown bound id `{0}`")]
    UnknownBound(String),
    #[error("k = {k} out of range for {len} bits")]
    OutOfRange { k: usize, len: usize },
    #[error("{cases} cases exceed the budget of {budget}")]
    BudgetExceeded { cases: u128, budget: u128 },
    #[error("grid needs at least two points per axis")]
    GridTooSmall,
    #[error("n list must be nonempty and strictly ascending")]
    BadNList,
    #[error(transparent)]
    Construct(#[from] ConstructError),
    #[error(transparent)]
    Ir(#[from] IrError),
}
