//! Stationary multivariate random distribution fields on a discretized
//! space of test functions: atomic matrix-valued spectral measures, Monte
//! Carlo synthesis of the associated gramian orthogonally scattered measure,
//! and numerical checks of the structural identities relating covariance,
//! spectral distribution and spectral measure.
//!
//! Fourier convention throughout: `(F phi)(t) = ∫ phi(x) exp(-2 pi i <x, t>) dx`.

pub mod action_stationarity;
pub mod cli;
pub mod covariance_analysis;
pub mod error;
pub mod field_synthesis;
pub mod fixtures;
pub mod kolmogorov_map;
pub mod grid_calculus;
pub mod operator_algebra;
pub mod spectral_measure;

pub use error::{Error, Result};
