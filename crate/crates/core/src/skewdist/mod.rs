//! Skewed multivariate laws built as normal variance-mean mixtures, the
//! generalized inverse Gaussian law of their mixing variable, and the special
//! functions both need.

pub mod bessel;
pub mod density;
pub mod gig;
pub mod sample;
pub mod special;

pub use bessel::{dlog_bessel_k_dlambda, log_bessel_k};
pub use density::{
    conditional_gig, log_normal_given_w, skew_log_density, unified_constants, FamilyKind,
    QuadForms, SkewFamily, SkewParams, UnifiedConstants,
};
pub use gig::{gig_expectations, latent_moments, GigMoments, GigParams};
pub use sample::{sample_mixing, sample_skew, sample_skew_with};
pub use special::{digamma, trigamma};
