use super::critval::CriticalValueTable;
use super::harmonic::fit_harmonic_values;
use super::mosum::{ols_mosum_values, MosumPath};
use super::segment::{fit_line, segment_trend_values};
use crate::error::{Error, Result};
use crate::gapfill::{fill, FillMethod};
use crate::model::{DetectorConfig, HarmonicModel, PiecewiseTrend, SampledSeries};

/// Outcome of the season/trend break detector on one series.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionResult {
    /// Verdict of the last OLS-MOSUM test.
    pub significant: bool,
    /// 1-based trend breakpoints; empty when the test did not reject.
    pub breakpoints: Vec<usize>,
    pub trend: PiecewiseTrend,
    pub season: HarmonicModel,
    pub mosum: MosumPath,
    pub critical_value: f64,
    pub iterations_used: usize,
    /// The breakpoint set stabilised before `max_iterations`.
    pub converged: bool,
    /// Gap filling fell back from spline to linear interpolation.
    pub fill_fell_back: bool,
    /// `max_breaks` exceeded what the minimum segment length allows.
    pub max_breaks_capped: bool,
}

/// Gap-fill `series` and run the detector with the bundled critical values.
pub fn detect(
    series: &SampledSeries,
    cfg: &DetectorConfig,
    fill_method: FillMethod,
) -> Result<DetectionResult> {
    detect_with_table(series, cfg, fill_method, CriticalValueTable::builtin())
}

pub fn detect_with_table(
    series: &SampledSeries,
    cfg: &DetectorConfig,
    fill_method: FillMethod,
    table: &CriticalValueTable,
) -> Result<DetectionResult> {
    cfg.validate(series.len())?;
    let filled = fill(series, fill_method)?;
    let mut result = detect_complete(filled.series.values(), cfg, table)?;
    result.fill_fell_back = filled.fell_back_to_linear;
    Ok(result)
}

/// Detector on an already complete series (`values[i]` at `t = i + 1`).
pub fn detect_complete(
    values: &[f64],
    cfg: &DetectorConfig,
    table: &CriticalValueTable,
) -> Result<DetectionResult> {
    let n = values.len();
    cfg.validate(n)?;
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::domain("detector input contains non-finite values"));
    }
    let h = cfg.bandwidth_h;
    let critical_value = table.lookup(h, cfg.significance_alpha)?;

    let mut season = fit_harmonic_values(values, cfg.harmonic_order)?;
    let mut previous: Option<Vec<usize>> = None;
    let mut iterations = 0;
    let mut max_breaks_capped = false;

    loop {
        iterations += 1;
        let seasonal = season.fitted(n);
        let deseasonalized: Vec<f64> = values.iter().zip(&seasonal).map(|(y, s)| y - s).collect();
        let mosum = ols_mosum_values(&deseasonalized, h)?;
        let significant = mosum.max_abs() > critical_value;

        if !significant {
            let (a, b) = fit_line(&deseasonalized, 1, n);
            return Ok(DetectionResult {
                significant,
                breakpoints: Vec::new(),
                trend: PiecewiseTrend::linear(n, a, b),
                season,
                mosum,
                critical_value,
                iterations_used: iterations,
                converged: true,
                fill_fell_back: false,
                max_breaks_capped,
            });
        }

        let seg = segment_trend_values(&deseasonalized, h, cfg.max_breaks)?;
        max_breaks_capped |= seg.max_breaks_capped;
        let trend = seg.trend;
        let trend_fit = trend.fitted();
        let detrended: Vec<f64> = values.iter().zip(&trend_fit).map(|(y, t)| y - t).collect();
        season = fit_harmonic_values(&detrended, cfg.harmonic_order)?;

        let breakpoints = trend.breakpoints().to_vec();
        let converged = previous.as_deref() == Some(breakpoints.as_slice());
        if converged || iterations >= cfg.max_iterations {
            return Ok(DetectionResult {
                significant,
                breakpoints,
                trend,
                season,
                mosum,
                critical_value,
                iterations_used: iterations,
                converged,
                fill_fell_back: false,
                max_breaks_capped,
            });
        }
        previous = Some(breakpoints);
    }
}
