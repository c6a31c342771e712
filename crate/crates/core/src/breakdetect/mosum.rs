use crate::error::{Error, Result};
use crate::model::{window_len, SampledSeries};

/// Moving sums of OLS residuals under the no-change linear-trend model.
#[derive(Debug, Clone, PartialEq)]
pub struct MosumPath {
    /// `M_j` for window starts `j = 1..=n - window_len + 1`.
    pub statistics: Vec<f64>,
    pub window_len: usize,
    /// Residual scale `sqrt(RSS / (n - 2))`; zero when the residuals vanish.
    pub sigma_hat: f64,
}

impl MosumPath {
    /// Test statistic `max_j |M_j|`.
    pub fn max_abs(&self) -> f64 {
        self.statistics.iter().fold(0.0, |m, s| m.max(s.abs()))
    }

    /// 1-based start of the window with the largest `|M_j|` (earliest on ties).
    pub fn argmax(&self) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (i, s) in self.statistics.iter().enumerate() {
            if best.is_none_or(|(_, b)| s.abs() > b) {
                best = Some((i + 1, s.abs()));
            }
        }
        best.map(|(j, _)| j)
    }
}

/// OLS-MOSUM process of a fully observed series.
pub fn ols_mosum(series: &SampledSeries, h: f64) -> Result<MosumPath> {
    if !series.is_complete() {
        return Err(Error::domain("OLS-MOSUM needs a fully observed series"));
    }
    ols_mosum_values(series.values(), h)
}

/// Slice-level OLS-MOSUM.
///
/// Fits `y_t = a + b t` over the whole sample, then returns
/// `M_j = sum_{t=j}^{j+w-1} r_t / (sigma_hat * sqrt(n))` with `w = ceil(n h)`.
pub fn ols_mosum_values(values: &[f64], h: f64) -> Result<MosumPath> {
    let n = values.len();
    if !(h > 0.0 && h < 1.0) {
        return Err(Error::domain(format!("bandwidth h must lie in (0, 1), got {h}")));
    }
    if (n as f64) * h < 2.0 {
        return Err(Error::domain(format!(
            "series of length {n} too short for bandwidth {h}"
        )));
    }
    let w = window_len(n, h);
    if w < 3 {
        return Err(Error::domain(format!("window length {w} below 3")));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::domain("OLS-MOSUM input contains non-finite values"));
    }

    let residuals = linear_residuals(values);
    let rss: f64 = residuals.iter().map(|r| r * r).sum();
    let sigma_hat = (rss / (n - 2) as f64).sqrt();
    let scale = values.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let count = n - w + 1;

    if sigma_hat <= 1e-10 * scale {
        return Ok(MosumPath {
            statistics: vec![0.0; count],
            window_len: w,
            sigma_hat: 0.0,
        });
    }

    let norm = sigma_hat * (n as f64).sqrt();
    let mut statistics = Vec::with_capacity(count);
    let mut window: f64 = residuals[..w].iter().sum();
    statistics.push(window / norm);
    for j in 1..count {
        window += residuals[j + w - 1] - residuals[j - 1];
        statistics.push(window / norm);
    }
    Ok(MosumPath {
        statistics,
        window_len: w,
        sigma_hat,
    })
}

/// Residuals of the OLS line through `(t, values[t-1])`, `t = 1..=n`.
pub(crate) fn linear_residuals(values: &[f64]) -> Vec<f64> {
    let n = values.len() as f64;
    let t_mean = (n + 1.0) / 2.0;
    let y_mean = values.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (i, y) in values.iter().enumerate() {
        let dt = (i + 1) as f64 - t_mean;
        sxy += dt * (y - y_mean);
        sxx += dt * dt;
    }
    let slope = sxy / sxx;
    values
        .iter()
        .enumerate()
        .map(|(i, y)| y - y_mean - slope * ((i + 1) as f64 - t_mean))
        .collect()
}
