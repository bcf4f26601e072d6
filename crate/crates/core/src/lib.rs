//! Two-layer Lorenz '96 toolkit for data-driven stochastic parameterization.
//!
//! The pipeline mirrors how a reduced model is built from a resolved one:
//!
//! 1. [`l96::simulate_full`] integrates the full two-layer system and samples
//!    the large-scale state `x` together with the small-scale feedback `b`.
//! 2. [`estimation::fit_parameterization`] (VARX family) or
//!    [`narmax::fit_narmax`] fits a stochastic surrogate for `b`.
//! 3. [`reduced::simulate_reduced`] integrates the large-scale equation alone,
//!    forced by the surrogate.
//! 4. [`diagnostics`] computes long-term statistics of both runs and
//!    [`diagnostics::compare_reports`] measures their distance.

pub mod config;
pub mod diagnostics;
pub mod error;
pub mod estimation;
pub mod io;
pub mod l96;
pub mod linalg;
pub mod narmax;
pub mod reduced;
pub mod series;
pub mod varx;

pub use config::ModelConfig;
pub use error::{Error, Result};
pub use series::{RowMatrix, SampleSeries};

/// Absolute bound on any state value before a run is declared divergent.
pub const DIVERGENCE_BOUND: f64 = 1e6;
