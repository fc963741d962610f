//! Clustering of longitudinal data with Gaussian mixtures whose cluster means
//! are natural cubic smoothing splines.

// NaN-rejecting guards are written as negated comparisons on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod alpha_search;
pub mod band_spline;
pub mod config;
pub mod dense;
pub mod error;
pub mod evaluation;
pub mod init;
pub mod io;
pub mod model;
pub mod synth;

pub use config::FitConfig;
pub use error::{Error, Result};
pub use model::{fit_em, Dataset, FitResult, MixtureParams, Responsibilities};
