//! Simulation and analysis kernels for studying how robust top-correlated
//! feature lists are, and how well a Fisher-scale empirical-Bayes shortcut
//! predicts that robustness.
//!
//! * [`correlation`]: Pearson correlations, Fisher transform, empirical moments.
//! * [`models`]: sparse linear, joint Gaussian and Fisher-Gaussian prior samplers.
//! * [`asymptotics`]: cubic eigenvalue roots, Isserlis moments, the pairwise
//!   asymptotic-independence condition and the delta-method covariance.
//! * [`selection`]: top-u selection, straightforward and approximated
//!   estimators, sample-size search.
//! * [`diagnostics`]: histogram, QQ pairs, normality summaries.

pub mod asymptotics;
pub mod correlation;
pub mod diagnostics;
pub mod error;
pub mod models;
pub mod rng;
pub mod selection;

pub use error::{Error, Result};
pub use rng::SeedStream;
