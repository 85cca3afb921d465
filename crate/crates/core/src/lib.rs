//! Exact efficient influence functions on finite factorized distributions,
//! with numerical checks that each one is the gradient of its parameter.

// NaN-rejecting guards are written as negated comparisons on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cli;
pub mod dist;
pub mod eif;
pub mod error;
pub mod estimate;
pub mod generate;
pub mod params;
pub mod tangent;
pub mod verify;

pub use dist::{
    ConditionalFactor, FactorizedDistribution, OutcomePoint, QuadratureGrid, VariableSpec,
};
pub use eif::{influence, Component, InfluenceFunction};
pub use error::{Error, Result};
pub use params::{psi, ParameterSpec};
pub use tangent::ScoreFunction;
