//! Numerical workbench for transfinite diameters of compact sets in `C^N`:
//! Fekete/Vandermonde maxima, Chebyshev constants, and orthogonal-polynomial
//! integrals, plus the identities that tie them together.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod chebyshev;
pub mod cone_case;
pub mod discrete_ortho;
pub mod domain_models;
pub mod error;
pub mod fekete;
pub mod graded_basis;
pub mod linalg;
pub mod logvalue;
pub mod montecarlo;
pub mod orthopoly;
pub mod par;
pub mod rumely;
pub mod vandermonde;

pub use error::{Error, Result};
pub use logvalue::LogValue;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
