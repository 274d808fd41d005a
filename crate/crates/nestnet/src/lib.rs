//! Nested ReLU networks.
//!
//! Networks whose hidden neurons may be activated by other registered networks, with exact
//! rational evaluation, symbolic piecewise-linear flattening, constructive builders for floor,
//! bit-extraction, point-fitting and approximation networks, a verification harness, and a
//! small trainer for the shared-activation scheme.

pub mod cli;
pub mod constructive;
pub mod ir;
pub mod numerics;
pub mod train;
pub mod verify;

pub use ir::{compose, parallel, Activation, AffineMap, Chain, IrError, NestNet, NetId, Violation};
pub use numerics::{NumericsError, PiecewiseLinear1D, Scalar, Q};
