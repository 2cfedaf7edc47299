//! Structure-preserving simulation of the Zeitlin model of 2D Euler on the sphere.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate blas_src;

pub mod diagnostics;
pub mod error;
pub mod harness;
pub mod integrators;
pub mod linalg;
pub mod model;
pub mod quantization;
pub mod scenarios;
pub mod state;
pub mod stream;

pub use error::{Error, Result};
pub use model::Model;
