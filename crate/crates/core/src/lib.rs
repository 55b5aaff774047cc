//! Numerical laboratory for the iteration of transcendental entire
//! functions: value-distribution quantities on circles, growth-condition
//! classification, exclusion-disk constructions, a desk-scale escaping-point
//! construction, and box-counting dimension of escaping/Julia sets on
//! bounded windows.

pub mod complex_ext;
pub mod error;
pub mod fractal;
pub mod function;
pub mod growth;
pub mod logderiv;
pub mod modulus;
pub mod proof;

pub use complex_ext::{wrap_angle, ComplexSample};
pub use error::{Error, Result};
pub use function::{FunctionKind, FunctionSpec};
