//! Numerical construction of blow-up solutions of the focusing wave equation
//! u_tt − Δu = |u|^{p−1}u that blow up on a prescribed space-like hypersurface.
//!
//! Pipeline: [`geometry`] flattens the hypersurface, [`ansatz`] builds the
//! approximate solution V_J, [`solver`] integrates the transformed equation,
//! and [`diagnostics`] pulls the result back to (t, x).

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod ansatz;
pub mod diagnostics;
pub mod error;
pub mod experiment;
pub mod fit;
pub mod geometry;
pub mod grid;
pub mod io;
pub mod model;
pub mod quad;
pub mod solver;

pub use error::{ForgeError, Result};
pub use model::{BumpA, ModelParams, Nonlinearity};
