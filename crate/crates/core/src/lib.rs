//! Clustering of paired multivariate functional data with mixtures of
//! functional linear regressions whose coefficients follow skewed laws
//! (variance-gamma, skew-t, normal-inverse-Gaussian).
//!
//! The pipeline is: smooth raw curves onto B-spline bases ([`funbasis`]),
//! fit the mixture by EM ([`em`]), pick the number of clusters and the
//! covariance structure by BIC, and score partitions with [`eval::ari`].

pub mod em;
pub mod error;
pub mod eval;
pub mod funbasis;
pub mod io;
pub mod model;
mod serde_mat;
pub mod sim;
pub mod skewdist;

pub use error::{Error, Result};
