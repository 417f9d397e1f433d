//! Dense linear algebra and quadrature kernel.

mod expm;
mod linalg;
mod quad;

pub use expm::matrix_exp;
pub use linalg::*;
pub use quad::{integrate, integrate_decaying, integrate_finite, truncation_point, Integral, QuadValue};
