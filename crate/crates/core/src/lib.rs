//! Numerical homogenization of fully nonlinear uniformly elliptic equations
//! `F(ω, x/ε, D²u) = 0` whose coefficients are stationary, ergodic and
//! weakly* almost periodic.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ap;
pub mod error;
pub mod exec;
pub mod fields;
pub mod operators;
pub mod solver;
pub mod corrector;
pub mod harness;

pub use error::{Error, Result};
