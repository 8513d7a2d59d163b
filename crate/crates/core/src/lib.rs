//! Numerical tools for the Dirichlet problem for complex Hessian equations
//! `(dd^c u)^m ∧ β^{n−m} = f β^n` on strongly m-pseudoconvex domains.

// `!(x > 0.0)` deliberately rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod barriers;
pub mod capacity;
pub mod data;
pub mod domain;
pub mod error;
pub mod grid;
pub mod math;
pub mod regularity;
pub mod solver;

pub use error::{Error, Result};
