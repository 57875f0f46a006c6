//! Covariance reconstruction of random fields from finite element samples.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod config;
pub mod csvio;
pub mod error;
pub mod estimators;
pub mod experiments;
pub mod fem;
pub mod field;
pub mod lambert;
pub mod linalg;
pub mod planner;
pub mod quadrature;
pub mod spectral;

pub use error::{Error, Result};
pub use nalgebra;
