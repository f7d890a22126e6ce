//! Semiparametric copula-based conditional quantile regression for complete
//! and right-censored responses.
//!
//! The estimator weights each uncensored response by an inverse-probability
//! of censoring weight times a fitted copula density, then reads the
//! conditional quantile off as a weighted order statistic. Copula densities
//! come from a vine whose response/covariate pairs are estimated
//! nonparametrically (probit-transformed local likelihood) while the
//! covariate-only conditional dependence uses parametric pair copulas.

pub mod cqr;
pub mod error;
pub mod paircop;
pub mod simlab;
pub mod stats;
pub mod survival;
pub mod vine;

pub use error::{Error, Result};
