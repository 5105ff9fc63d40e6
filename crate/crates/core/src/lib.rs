//! Stationary-phase analysis of geometric phase integrals.

// `!(x > 0.0)` is used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod betaflow;
pub mod critpoints;
pub mod error;
pub mod fields;
pub mod irrational;
pub mod lagrangian;
pub mod linalg;
mod lowdisc;
pub mod quadrature;
pub mod phasetrack;
pub mod stationary;

pub use error::{Error, Result};
