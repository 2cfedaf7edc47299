//! Quantization of functions on the sphere into `u(N)`.

pub mod basis;
pub mod field;
pub mod spin;
pub mod wigner;

pub use basis::{basis_matrix, BasisMatrix, BasisSet, CoefficientVector, HarmonicIndex};
pub use field::{render_coefficients, render_field, FieldGrid};
pub use spin::spin_matrices;
pub use wigner::{wigner3j, Half};
