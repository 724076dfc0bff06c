//! Moments, cumulants and convolution semigroups on free *-bialgebras of
//! non-commutative polynomials.
//!
//! The crate is `no_std` (with `alloc`) and covers the algebraic core:
//! polynomials, coproducts, convolution calculus of functionals, positivity
//! tests, a truncated symmetric Fock space and a discretized unitary QSDE.
//!
//! ```
//! use tensorlevy_core::functional::{conv_exp, cumulant_functional, gaussian_moments, CovarianceMatrix};
//! use tensorlevy_core::linalg::CMatrix;
//! use tensorlevy_core::scalar::c;
//!
//! # fn main() -> tensorlevy_core::Result<()> {
//! let q = CovarianceMatrix::new(CMatrix::from_row_slice(2, 2, &[
//!     c(0.5, 0.0), c(0.0, 0.5),
//!     c(0.0, -0.5), c(0.5, 0.0),
//! ]))?;
//! let phi = conv_exp(&cumulant_functional(&q, 6))?;
//! assert!(phi.max_abs_diff(&gaussian_moments(&q, 6)) < 1e-12);
//! let w = q.alphabet().parse_word("x1x2")?;
//! assert!((phi.value(&w)? - c(0.0, 0.5)).norm() < 1e-12);
//! # Ok(())
//! # }
//! ```

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod coalg;
pub mod error;
pub mod fock;
pub mod functional;
pub mod linalg;
pub mod ncpoly;
pub mod positivity;
pub mod qsde;
pub mod scalar;
pub mod tensor;

pub use coalg::{coproduct, counit, generated_subcoalgebra, minimal_tensor_representation, MinimalRepresentation};
pub use error::{Error, Result};
pub use fock::{BinGrid, FockOperator, FockVector, Triplet};
pub use functional::{CovarianceMatrix, Functional, GeneratorFunctional, MomentFunctional};
pub use ncpoly::{Alphabet, Letter, NCPolynomial, Word};
pub use positivity::{MomentMatrix, PsdReport};
pub use qsde::{Drift, QsdeModel, UnitaryProcess};
pub use scalar::Scalar;
pub use tensor::{TensorElement, TripleTensorElement};
