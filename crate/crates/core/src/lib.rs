// NaN-rejecting checks are written as `!(x > 0.0)`.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod collision;
pub mod diagnostics;
pub mod entropy;
pub mod equilibrium;
pub mod error;
pub mod grid;
pub mod integrator;
pub mod quad;
pub mod special;

pub use error::{Error, Result};
