//! Shared domain types: the sampled series, the piecewise-linear trend, the
//! harmonic season, and detector configuration.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Observations per year on the 16-day compositing grid.
pub const CADENCE: usize = 23;

/// Number of samples in a window of relative width `h` over `n` samples,
/// i.e. `ceil(n * h)`.
///
/// A small slack absorbs products such as `100 * 0.23` that land a few ulps
/// above an integer.
pub fn window_len(n: usize, h: f64) -> usize {
    (n as f64 * h - 1e-9).ceil().max(0.0) as usize
}

/// A fixed-cadence index time series with an explicit observation mask.
///
/// Positions are addressed 1-based in the public API (`t = 1..=n`), matching
/// the breakpoint convention used throughout the crate.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledSeries {
    values: Vec<f64>,
    mask: Vec<bool>,
    start_year: i32,
}

impl SampledSeries {
    /// Build a series; `mask[i] == true` marks an observed sample.
    pub fn new(values: Vec<f64>, mask: Vec<bool>, start_year: i32) -> Result<Self> {
        if values.len() != mask.len() {
            return Err(Error::domain(format!(
                "values ({}) and mask ({}) differ in length",
                values.len(),
                mask.len()
            )));
        }
        if values.len() < 2 * CADENCE {
            return Err(Error::domain(format!(
                "series length {} is shorter than two years ({})",
                values.len(),
                2 * CADENCE
            )));
        }
        Ok(Self {
            values,
            mask,
            start_year,
        })
    }

    /// A fully observed series.
    pub fn complete(values: Vec<f64>, start_year: i32) -> Result<Self> {
        let mask = vec![true; values.len()];
        Self::new(values, mask, start_year)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn start_year(&self) -> i32 {
        self.start_year
    }

    pub fn cadence(&self) -> usize {
        CADENCE
    }

    pub fn observed_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    pub fn is_complete(&self) -> bool {
        self.mask.iter().all(|&m| m)
    }

    /// Value at 1-based position `t`, or `None` when masked or out of range.
    pub fn get(&self, t: usize) -> Option<f64> {
        if t == 0 || t > self.len() || !self.mask[t - 1] {
            None
        } else {
            Some(self.values[t - 1])
        }
    }

    /// Same values under a new mask.
    pub fn with_mask(&self, mask: Vec<bool>) -> Result<Self> {
        Self::new(self.values.clone(), mask, self.start_year)
    }

    /// Calendar year of 1-based position `t`.
    pub fn year_of(&self, t: usize) -> Result<i32> {
        if t == 0 || t > self.len() {
            return Err(Error::domain(format!(
                "position {t} outside 1..={}",
                self.len()
            )));
        }
        Ok(self.start_year + ((t - 1) / CADENCE) as i32)
    }
}

/// Piecewise-linear trend `T_t = alpha_j + beta_j * t` for
/// `tau_{j-1} < t <= tau_j`.
///
/// Breakpoints are 1-based indices of the last sample of each left segment.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseTrend {
    n: usize,
    breakpoints: Vec<usize>,
    intercepts: Vec<f64>,
    slopes: Vec<f64>,
}

impl PiecewiseTrend {
    pub fn new(
        n: usize,
        breakpoints: Vec<usize>,
        intercepts: Vec<f64>,
        slopes: Vec<f64>,
    ) -> Result<Self> {
        if intercepts.len() != breakpoints.len() + 1 || slopes.len() != breakpoints.len() + 1 {
            return Err(Error::domain(format!(
                "{} breakpoints need {} (intercept, slope) pairs, got {} and {}",
                breakpoints.len(),
                breakpoints.len() + 1,
                intercepts.len(),
                slopes.len()
            )));
        }
        let mut prev = 0;
        for &b in &breakpoints {
            if b <= prev || b >= n {
                return Err(Error::domain(format!(
                    "breakpoints {breakpoints:?} must be strictly increasing inside (0, {n})"
                )));
            }
            prev = b;
        }
        Ok(Self {
            n,
            breakpoints,
            intercepts,
            slopes,
        })
    }

    /// A single line over `1..=n`.
    pub fn linear(n: usize, intercept: f64, slope: f64) -> Self {
        Self {
            n,
            breakpoints: Vec::new(),
            intercepts: vec![intercept],
            slopes: vec![slope],
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn breakpoints(&self) -> &[usize] {
        &self.breakpoints
    }

    pub fn intercepts(&self) -> &[f64] {
        &self.intercepts
    }

    pub fn slopes(&self) -> &[f64] {
        &self.slopes
    }

    /// Index of the segment containing 1-based position `t`.
    pub fn segment_of(&self, t: usize) -> usize {
        self.breakpoints.partition_point(|&b| b < t)
    }

    pub fn eval(&self, t: usize) -> Result<f64> {
        if t == 0 || t > self.n {
            return Err(Error::domain(format!("t = {t} outside 1..={}", self.n)));
        }
        let j = self.segment_of(t);
        Ok(self.intercepts[j] + self.slopes[j] * t as f64)
    }

    /// The trend at every position `1..=n`.
    pub fn fitted(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n);
        let mut j = 0;
        for t in 1..=self.n {
            while j < self.breakpoints.len() && self.breakpoints[j] < t {
                j += 1;
            }
            out.push(self.intercepts[j] + self.slopes[j] * t as f64);
        }
        out
    }
}

/// Evaluate `trend` at 1-based position `t`.
pub fn eval_trend(trend: &PiecewiseTrend, t: usize) -> Result<f64> {
    trend.eval(t)
}

/// Harmonic seasonal model with period [`CADENCE`].
#[derive(Debug, Clone, PartialEq)]
pub struct HarmonicModel {
    mean_level: f64,
    cos_coef: Vec<f64>,
    sin_coef: Vec<f64>,
}

impl HarmonicModel {
    pub fn new(mean_level: f64, cos_coef: Vec<f64>, sin_coef: Vec<f64>) -> Result<Self> {
        if cos_coef.is_empty() || cos_coef.len() != sin_coef.len() {
            return Err(Error::domain(format!(
                "harmonic order must be >= 1 with matching cos/sin lengths, got {} and {}",
                cos_coef.len(),
                sin_coef.len()
            )));
        }
        Ok(Self {
            mean_level,
            cos_coef,
            sin_coef,
        })
    }

    pub fn order(&self) -> usize {
        self.cos_coef.len()
    }

    pub fn mean_level(&self) -> f64 {
        self.mean_level
    }

    pub fn cos_coef(&self) -> &[f64] {
        &self.cos_coef
    }

    pub fn sin_coef(&self) -> &[f64] {
        &self.sin_coef
    }

    /// Amplitude of harmonic `k` (1-based).
    pub fn amplitude(&self, k: usize) -> Option<f64> {
        let i = k.checked_sub(1)?;
        Some(self.cos_coef.get(i)?.hypot(*self.sin_coef.get(i)?))
    }

    /// Phase of harmonic `k` (1-based) in radians, so that the harmonic reads
    /// `amplitude * cos(2 pi k t / 23 - phase)`.
    pub fn phase(&self, k: usize) -> Option<f64> {
        let i = k.checked_sub(1)?;
        Some(self.sin_coef.get(i)?.atan2(*self.cos_coef.get(i)?))
    }

    pub fn eval(&self, t: usize) -> Result<f64> {
        if t == 0 {
            return Err(Error::domain("seasonal evaluation needs t >= 1"));
        }
        Ok(self.eval_unchecked(t))
    }

    fn eval_unchecked(&self, t: usize) -> f64 {
        // Reducing t modulo the period keeps the result exactly periodic.
        let phase = (t % CADENCE) as f64 / CADENCE as f64;
        let mut s = self.mean_level;
        for (i, (c, sn)) in self.cos_coef.iter().zip(&self.sin_coef).enumerate() {
            let w = 2.0 * PI * (i + 1) as f64 * phase;
            s += c * w.cos() + sn * w.sin();
        }
        s
    }

    /// The season at every position `1..=n`.
    pub fn fitted(&self, n: usize) -> Vec<f64> {
        (1..=n).map(|t| self.eval_unchecked(t)).collect()
    }
}

/// Evaluate `model` at 1-based position `t`.
pub fn eval_season(model: &HarmonicModel, t: usize) -> Result<f64> {
    model.eval(t)
}

/// White-noise scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    sigma: f64,
}

impl NoiseSpec {
    pub fn new(sigma: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::domain(format!("noise sigma must be > 0, got {sigma}")));
        }
        Ok(Self { sigma })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }
}

/// Parameters of the break detector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorConfig {
    /// Relative MOSUM window width and minimum segment length, in (0, 1).
    pub bandwidth_h: f64,
    /// Significance level of the OLS-MOSUM test.
    pub significance_alpha: f64,
    pub max_breaks: usize,
    /// Upper bound on season/trend refit rounds.
    pub max_iterations: usize,
    pub harmonic_order: usize,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            bandwidth_h: 0.15,
            significance_alpha: 0.05,
            max_breaks: 10,
            max_iterations: 10,
            harmonic_order: 2,
        }
    }
}

impl DetectorConfig {
    pub fn with_bandwidth(mut self, h: f64) -> Self {
        self.bandwidth_h = h;
        self
    }

    /// Check the configuration against a series of length `n`.
    pub fn validate(&self, n: usize) -> Result<()> {
        let h = self.bandwidth_h;
        if !(h > 0.0 && h < 1.0) {
            return Err(Error::config(format!("bandwidth h must lie in (0, 1), got {h}")));
        }
        let a = self.significance_alpha;
        if !(a > 0.0 && a < 1.0) {
            return Err(Error::config(format!(
                "significance level must lie in (0, 1), got {a}"
            )));
        }
        if self.max_breaks == 0 {
            return Err(Error::config("max_breaks must be >= 1"));
        }
        if self.max_iterations == 0 {
            return Err(Error::config("max_iterations must be >= 1"));
        }
        if !(1..=4).contains(&self.harmonic_order) {
            return Err(Error::config(format!(
                "harmonic order must be in 1..=4, got {}",
                self.harmonic_order
            )));
        }
        let w = window_len(n, h);
        if w < 3 {
            return Err(Error::config(format!(
                "window ceil({n} * {h}) = {w} is too short to fit a linear segment"
            )));
        }
        Ok(())
    }
}
