//! Spectral Galerkin simulation of the stochastic hydrostatic primitive
//! equations on the periodic cube, with estimators for the horizontal and
//! vertical viscosities built from finitely many observed Fourier modes.

// `!(x > y)` checks deliberately reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod estimators;
pub mod harness;
pub mod io;
pub mod linear;
pub mod model;
pub mod noise;
pub mod solver;
pub mod spectral;
pub mod stats;

pub use error::{Result, SpeError};
pub use model::ModelParams;
