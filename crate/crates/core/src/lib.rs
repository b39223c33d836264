//! Principal covariates regression (PCovR) with kernel and sparse-kernel
//! extensions, for building low-dimensional structure-property maps.
//!
//! Modules are layered bottom-up: [`numerics`] provides the symmetric
//! eigensolver and solves, [`preprocess`] and [`kernels`] prepare inputs,
//! [`linear_models`] and [`kernel_models`] fit projectors, [`losses`] scores
//! them, [`aggregate`] handles environment/structure additivity and
//! [`pipeline`] drives complete runs from delimited text files.

pub mod aggregate;
pub mod error;
pub mod kernel_models;
pub mod kernels;
pub mod linear_models;
pub mod losses;
pub mod method;
pub mod numerics;
pub mod parallel;
pub mod pipeline;
pub mod preprocess;

pub use error::{Error, Result};
pub use method::Method;
pub use parallel::Execution;
