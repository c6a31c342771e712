//! Temporal gap filling on the 16-day grid.
//!
//! Interior gaps are interpolated from the observed samples; leading and
//! trailing gaps take the value of the nearest observation. Observed samples
//! pass through untouched.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::model::SampledSeries;

/// Interpolation scheme for interior gaps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FillMethod {
    Linear,
    /// Natural cubic spline through every observed sample.
    CubicSpline,
}

impl FillMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            FillMethod::Linear => "linear",
            FillMethod::CubicSpline => "spline",
        }
    }
}

impl fmt::Display for FillMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FillMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "linear" => Ok(FillMethod::Linear),
            "spline" | "cubic" | "cubicspline" | "cubic_spline" => Ok(FillMethod::CubicSpline),
            other => Err(Error::config(format!(
                "unknown fill method `{other}` (expected linear or spline)"
            ))),
        }
    }
}

/// Outcome of [`fill`].
#[derive(Debug, Clone, PartialEq)]
pub struct FilledSeries {
    pub series: SampledSeries,
    /// The spline had fewer than four knots and linear interpolation was
    /// used instead.
    pub fell_back_to_linear: bool,
}

/// Fill every masked sample of `series`.
pub fn fill(series: &SampledSeries, method: FillMethod) -> Result<FilledSeries> {
    let (values, fell_back_to_linear) = fill_values(series.values(), series.mask(), method)?;
    let n = values.len();
    Ok(FilledSeries {
        series: SampledSeries::new(values, vec![true; n], series.start_year())?,
        fell_back_to_linear,
    })
}

/// Slice-level fill. Returns the completed values and whether the spline
/// fell back to linear interpolation.
pub fn fill_values(values: &[f64], mask: &[bool], method: FillMethod) -> Result<(Vec<f64>, bool)> {
    if values.len() != mask.len() {
        return Err(Error::domain("values and mask differ in length"));
    }
    let knots: Vec<usize> = (0..values.len()).filter(|&i| mask[i]).collect();
    if knots.len() < 2 {
        return Err(Error::InsufficientData {
            observed: knots.len(),
            required: 2,
        });
    }
    if knots.len() == values.len() {
        return Ok((values.to_vec(), false));
    }

    let mut out = values.to_vec();
    let first = knots[0];
    let last = *knots.last().unwrap();
    for v in &mut out[..first] {
        *v = values[first];
    }
    for v in &mut out[last + 1..] {
        *v = values[last];
    }

    let use_spline = method == FillMethod::CubicSpline && knots.len() >= 4;
    let fell_back = method == FillMethod::CubicSpline && !use_spline;
    if use_spline {
        let spline = NaturalSpline::new(&knots, values)?;
        for i in first..=last {
            if !mask[i] {
                out[i] = spline.eval(i);
            }
        }
    } else {
        for pair in knots.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            let (ya, yb) = (values[a], values[b]);
            let span = (b - a) as f64;
            for (i, v) in out.iter_mut().enumerate().take(b).skip(a + 1) {
                let w = (i - a) as f64 / span;
                *v = ya + w * (yb - ya);
            }
        }
    }
    Ok((out, fell_back))
}

/// Fraction of masked samples.
pub fn missing_fraction(series: &SampledSeries) -> f64 {
    mask_missing_fraction(series.mask())
}

pub fn mask_missing_fraction(mask: &[bool]) -> f64 {
    if mask.is_empty() {
        return 0.0;
    }
    mask.iter().filter(|&&m| !m).count() as f64 / mask.len() as f64
}

/// Natural cubic spline over integer abscissae.
struct NaturalSpline {
    x: Vec<f64>,
    y: Vec<f64>,
    /// Second derivatives at the knots.
    m: Vec<f64>,
}

impl NaturalSpline {
    fn new(knots: &[usize], values: &[f64]) -> Result<Self> {
        let x: Vec<f64> = knots.iter().map(|&i| i as f64).collect();
        let y: Vec<f64> = knots.iter().map(|&i| values[i]).collect();
        let k = x.len();
        let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();

        // Tridiagonal system for the interior second derivatives.
        let interior = k - 2;
        let mut sub = vec![0.0; interior];
        let mut diag = vec![0.0; interior];
        let mut sup = vec![0.0; interior];
        let mut rhs = vec![0.0; interior];
        for r in 0..interior {
            let i = r + 1;
            sub[r] = h[i - 1];
            diag[r] = 2.0 * (h[i - 1] + h[i]);
            sup[r] = h[i];
            rhs[r] = 6.0 * ((y[i + 1] - y[i]) / h[i] - (y[i] - y[i - 1]) / h[i - 1]);
        }
        let inner = solve_tridiagonal(&sub, &diag, &sup, &rhs)?;
        let mut m = vec![0.0; k];
        m[1..k - 1].copy_from_slice(&inner);
        Ok(Self { x, y, m })
    }

    fn eval(&self, at: usize) -> f64 {
        let xv = at as f64;
        let seg = self.x.partition_point(|&xi| xi <= xv).clamp(1, self.x.len() - 1) - 1;
        let (x0, x1) = (self.x[seg], self.x[seg + 1]);
        let (y0, y1) = (self.y[seg], self.y[seg + 1]);
        let (m0, m1) = (self.m[seg], self.m[seg + 1]);
        let h = x1 - x0;
        let a = x1 - xv;
        let b = xv - x0;
        m0 * a * a * a / (6.0 * h)
            + m1 * b * b * b / (6.0 * h)
            + (y0 / h - m0 * h / 6.0) * a
            + (y1 / h - m1 * h / 6.0) * b
    }
}

/// Thomas algorithm. The spline system is strictly diagonally dominant, so
/// no pivoting is needed.
fn solve_tridiagonal(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    for i in 0..n {
        let denom = if i == 0 {
            diag[0]
        } else {
            diag[i] - sub[i] * c[i - 1]
        };
        if denom == 0.0 || !denom.is_finite() {
            return Err(Error::Numeric("singular spline system".into()));
        }
        c[i] = sup[i] / denom;
        d[i] = if i == 0 {
            rhs[0] / denom
        } else {
            (rhs[i] - sub[i] * d[i - 1]) / denom
        };
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        x[i] = if i + 1 == n { d[i] } else { d[i] - c[i] * x[i + 1] };
    }
    Ok(x)
}
