//! Abrupt-change detection in gappy 16-day satellite index time series and
//! breakpoint-anchored burn severity mapping.
//!
//! The crate is organised around a per-pixel pipeline:
//!
//! 1. [`gapfill`] reconstructs missing samples on the 16-day grid.
//! 2. [`breakdetect`] decomposes the series into a harmonic season and a
//!    piecewise-linear trend, tests the deseasonalized series for structural
//!    change with the OLS-MOSUM statistic and dates the trend breaks by
//!    least-squares segmentation.
//! 3. [`severity`] turns every break into a dNBR value, a change class and a
//!    calendar year, and aggregates burned area per year.
//!
//! [`raster`] handles the flat-binary plane format and index stacks,
//! [`accuracy`] validates burned-area maps against a reference, and
//! [`simkit`] runs the Monte Carlo studies on synthetic series.

pub mod accuracy;
pub mod breakdetect;
pub mod error;
pub mod gapfill;
pub mod model;
pub mod pipeline;
pub mod raster;
pub mod seeding;
pub mod severity;
pub mod simkit;

pub use error::{Error, Result};

/// Version string written into every CSV header and plane sidecar.
pub const TOOL_VERSION: &str = concat!("burnscan ", env!("CARGO_PKG_VERSION"));
