//! Long-term statistics of large-scale trajectories and distances between them.
//!
//! All statistics pool over grid points, since the system is statistically
//! homogeneous in space.

mod correlation;
mod cpdf;
mod pdf;
mod report;
mod waves;

pub use correlation::{acf, acf_matrix, ccf, cross_correlation, pacf_pooled};
pub use cpdf::{conditional_pdf, ConditionalPdf};
pub use pdf::{
    count_modes, moving_average, pdf_histogram, Histogram, MODE_PROMINENCE, MODE_SMOOTHING_WINDOW,
};
pub use report::{
    build_report, compare_reports, moments, Check, CompareOptions, Comparison, DiagnosticsReport,
    ReportOptions, Thresholds, DEFAULT_BINS, DEFAULT_MAX_LAG,
};
pub use waves::{spatial_dft, wave_stats};
