//! Fisher–Rao geometry of equivalent Gaussian measures, computed on a finite
//! truncation of the underlying Hilbert space.

pub mod cli;
pub mod determinants;
pub mod error;
pub mod fisherrao;
pub mod gaussmodel;
pub mod manifold;
pub mod mcverify;
pub mod random;
pub mod symkernels;
pub mod unitized;

pub use error::{Error, Result};
pub use gaussmodel::{CovarianceModel, GaussianMeasure, PerturbationS};
pub use symkernels::{SpdMatrix, SymMatrix};
