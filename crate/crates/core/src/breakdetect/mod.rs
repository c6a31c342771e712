//! Season/trend decomposition with OLS-MOSUM testing and least-squares
//! dating of trend breaks.
//!
//! The detector alternates between two fits until the set of trend breaks
//! stops changing:
//!
//! * the season is a harmonic regression on the series minus the current
//!   trend;
//! * the deseasonalized series is tested for structural change with the
//!   OLS-MOSUM statistic and, when the no-change null is rejected, segmented
//!   into linear pieces by dynamic programming with BIC model selection.

mod critval;
mod detect;
mod harmonic;
mod mosum;
mod segment;

pub use critval::{mosum_critical_value, CriticalValue, CriticalValueTable, CritvalSpec};
pub use detect::{detect, detect_complete, detect_with_table, DetectionResult};
pub use harmonic::{fit_harmonic, fit_harmonic_values};
pub use mosum::{ols_mosum, ols_mosum_values, MosumPath};
pub use segment::{
    fit_line, optimal_breaks, segment_rss, segment_trend, segment_trend_values, Segmentation,
};
