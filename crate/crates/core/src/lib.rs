//! Volume integral solver for time-harmonic Maxwell scattering in an
//! inhomogeneous medium.
//!
//! The dense discrete integral operator is applied with FFT convolutions and
//! preconditioned by a sparse approximation: local stencils are chosen per
//! grid-point category to annihilate the non-local kernel interactions, the
//! resulting sparse system is factorized once with a nested-dissection
//! multifrontal LU, and its solve is used inside restarted GMRES.

pub mod bessel;
pub mod convolution;
pub mod dense;
pub mod driver;
pub mod error;
pub mod field;
pub mod grid;
pub mod greens;
pub mod krylov;
pub mod linalg;
pub mod medium;
pub mod multifrontal;
pub mod preconditioner;
pub mod quadrature;
pub mod sparse;
pub mod stencil;

pub use error::{Error, Result};
