//! Numerical geometry of the Heisenberg group `H_n`.
//!
//! The crate is organised bottom-up:
//!
//! * [`heisenberg`]: group law, dilations, the Korányi gauge, cones,
//!   projections along horizontal directions and symplectic linear algebra.
//! * [`grid`]: dyadic cell-midpoint grids over boxes with multilinear
//!   interpolation and a binary/JSON container format.
//! * [`graphs`]: intrinsic Lipschitz graphs over the vertical hyperplane
//!   `V_0 = {y_n = 0}`, cone checks, reparametrization and test families.
//! * [`beta`]: vertical-plane beta numbers, quasiboxes and affine fits.
//! * [`wavelet`]: tensor Haar decompositions on `[-1,1]^d` and the slice
//!   projections built from them.
//! * [`harness`]: multiscale experiments (Carleson sums of beta squared,
//!   slice theta integrals, quasibox calibration) and their reports.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod beta;
pub mod error;
pub mod graphs;
pub mod grid;
pub mod harness;
pub mod heisenberg;
pub(crate) mod linalg;
pub mod rng;
pub mod wavelet;

pub use error::{HsError, Result};
pub use heisenberg::{HPoint, HorizontalDirection, VerticalSubspaceBasis};
