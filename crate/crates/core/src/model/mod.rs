//! Scalar ingredients: parameters, cutoff, bump and nonlinearity.

pub mod bump;
pub mod cutoff;
pub mod nonlinearity;
pub mod params;
pub mod taylor;

pub use bump::{BumpA, BumpEval, RadialJet};
pub use cutoff::{chi, chi_jet, Jet2};
pub use nonlinearity::Nonlinearity;
pub use params::ModelParams;
pub use taylor::{sample_taylor_bounds, TaylorConstants, TaylorSampling};
