//! Differential entropy estimators for multivariate Gaussian mixtures, and a
//! mutual-information pipeline for binary-input multichannel recordings.
//!
//! The crate provides:
//!
//! - mixture types with cached Cholesky factors and derivative tensors of the
//!   log-mixture density up to fourth order ([`gmm`]);
//! - a Taylor-expansion entropy estimate with variance splitting ([`taylor`]);
//! - closed-form entropy bounds for two-component scalar mixtures ([`bounds`]);
//! - reference estimators by deterministic quadrature and seeded Monte Carlo
//!   ([`oracle`]);
//! - a labeled-multichannel mutual-information pipeline ([`erp`]) with
//!   synthetic data generation ([`datagen`]) and bootstrap-t confidence
//!   intervals for the median ([`bootstrap`]).
//!
//! Entropies are computed in nats internally; conversion to bits happens at
//! reporting boundaries.

pub mod bootstrap;
pub mod bounds;
pub mod datagen;
pub mod erp;
pub mod error;
pub mod gmm;
pub mod guide;
pub mod oracle;
pub mod taylor;

pub use nalgebra;

pub use error::{Error, Result};
pub use gmm::{
    gaussian_log_pdf, log_density_derivatives, mixture_from_json, mixture_pdf, mixture_to_json,
    CovarianceMatrix, GaussianComponent, GaussianMixture, LogDensityDerivatives, TaylorOrder,
};
pub use taylor::{
    entropy_taylor, entropy_with_splitting, select_split_target, split_component, EntropyEstimate,
    EstimatorMethod, SplitSchedule, SplitTargetRule,
};

/// Library version reported in JSON outputs.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Natural-log to bits conversion: `nats / LN_2`.
pub fn nats_to_bits(nats: f64) -> f64 {
    nats / std::f64::consts::LN_2
}
