use crate::error::{Error, Result};
use crate::model::{window_len, PiecewiseTrend, SampledSeries};

/// Relative RSS slack under which two placements count as tied.
const TIE_REL: f64 = 1e-12;
/// RSS below this fraction of the total sum of squares is treated as an
/// exact fit when comparing information criteria.
const EXACT_FIT_REL: f64 = 1e-14;

/// Result of least-squares segmentation with BIC model selection.
#[derive(Debug, Clone, PartialEq)]
pub struct Segmentation {
    pub trend: PiecewiseTrend,
    /// RSS of the selected model.
    pub rss: f64,
    /// Minimal RSS for `m = 0..=max_breaks_used` breaks.
    pub rss_by_breaks: Vec<f64>,
    pub bic: Vec<f64>,
    pub min_segment: usize,
    pub max_breaks_used: usize,
    /// The requested `max_breaks` did not fit and was reduced.
    pub max_breaks_capped: bool,
}

impl Segmentation {
    pub fn breakpoints(&self) -> &[usize] {
        self.trend.breakpoints()
    }
}

/// Segment a fully observed series into linear pieces of at least
/// `ceil(n h)` samples.
pub fn segment_trend(series: &SampledSeries, h: f64, max_breaks: usize) -> Result<Segmentation> {
    if !series.is_complete() {
        return Err(Error::domain("segmentation needs a fully observed series"));
    }
    segment_trend_values(series.values(), h, max_breaks)
}

/// Slice-level [`segment_trend`]; positions are `t = 1..=values.len()`.
pub fn segment_trend_values(values: &[f64], h: f64, max_breaks: usize) -> Result<Segmentation> {
    if !(h > 0.0 && h < 1.0) {
        return Err(Error::domain(format!("bandwidth h must lie in (0, 1), got {h}")));
    }
    let n = values.len();
    let w = window_len(n, h);
    if w < 3 {
        return Err(Error::domain(format!(
            "minimum segment ceil({n} * {h}) = {w} is below 3"
        )));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::domain("segmentation input contains non-finite values"));
    }
    let feasible = n / w - 1;
    let used = max_breaks.min(feasible);

    let costs = SegmentCosts::new(values, w);
    let table = costs.dynamic_program(used);

    let n_f = n as f64;
    let mean = values.iter().sum::<f64>() / n_f;
    let tss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    let floor = EXACT_FIT_REL * tss + f64::MIN_POSITIVE;

    let rss_by_breaks: Vec<f64> = (0..=used).map(|m| table.total(m)).collect();
    let bic: Vec<f64> = rss_by_breaks
        .iter()
        .enumerate()
        .map(|(m, &rss)| n_f * (rss.max(floor) / n_f).ln() + (3 * m + 2) as f64 * n_f.ln())
        .collect();
    let best_m = bic
        .iter()
        .enumerate()
        .fold(0, |best, (m, &b)| if b < bic[best] { m } else { best });

    let breakpoints = table.breakpoints(best_m);
    let trend = fit_pieces(values, &breakpoints)?;
    Ok(Segmentation {
        trend,
        rss: rss_by_breaks[best_m],
        rss_by_breaks,
        bic,
        min_segment: w,
        max_breaks_used: used,
        max_breaks_capped: used < max_breaks,
    })
}

/// Optimal placement of exactly `m` breaks with minimum segment length
/// `min_len`. Returns the 1-based breakpoints and the total RSS.
pub fn optimal_breaks(values: &[f64], min_len: usize, m: usize) -> Result<(Vec<usize>, f64)> {
    let n = values.len();
    if min_len < 2 || min_len * (m + 1) > n {
        return Err(Error::domain(format!(
            "{m} breaks with minimum segment {min_len} do not fit in {n} samples"
        )));
    }
    let costs = SegmentCosts::new(values, min_len);
    let table = costs.dynamic_program(m);
    Ok((table.breakpoints(m), table.total(m)))
}

/// RSS of the OLS line over 1-based positions `first..=last`, by a direct
/// two-pass solve.
pub fn segment_rss(values: &[f64], first: usize, last: usize) -> f64 {
    let (a, b) = fit_line(values, first, last);
    (first..=last)
        .map(|t| {
            let r = values[t - 1] - a - b * t as f64;
            r * r
        })
        .sum()
}

/// OLS intercept and slope over 1-based positions `first..=last`.
pub fn fit_line(values: &[f64], first: usize, last: usize) -> (f64, f64) {
    let len = (last - first + 1) as f64;
    let t_mean = (first + last) as f64 / 2.0;
    let y_mean = values[first - 1..last].iter().sum::<f64>() / len;
    if first == last {
        return (y_mean, 0.0);
    }
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for t in first..=last {
        let dt = t as f64 - t_mean;
        sxy += dt * (values[t - 1] - y_mean);
        sxx += dt * dt;
    }
    let slope = sxy / sxx;
    (y_mean - slope * t_mean, slope)
}

fn fit_pieces(values: &[f64], breakpoints: &[usize]) -> Result<PiecewiseTrend> {
    let n = values.len();
    let mut bounds = Vec::with_capacity(breakpoints.len() + 2);
    bounds.push(0);
    bounds.extend_from_slice(breakpoints);
    bounds.push(n);
    let (intercepts, slopes) = bounds
        .windows(2)
        .map(|w| fit_line(values, w[0] + 1, w[1]))
        .unzip();
    PiecewiseTrend::new(n, breakpoints.to_vec(), intercepts, slopes)
}

/// RSS of every admissible segment `[i, j]` (0-based, inclusive,
/// `j - i + 1 >= min_len`).
struct SegmentCosts {
    n: usize,
    min_len: usize,
    cost: Vec<f64>,
}

impl SegmentCosts {
    fn new(values: &[f64], min_len: usize) -> Self {
        let n = values.len();
        let mut cost = vec![f64::INFINITY; n * n];
        for i in 0..n {
            // Running centred moments (Welford) keep the RSS accurate even
            // when the segment is fitted almost exactly.
            let (mut mx, mut my, mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for (k, j) in (i..n).enumerate() {
                let x = (j + 1) as f64;
                let y = values[j];
                let cnt = (k + 1) as f64;
                let dx = x - mx;
                let dy = y - my;
                mx += dx / cnt;
                my += dy / cnt;
                sxx += dx * (x - mx);
                sxy += dx * (y - my);
                syy += dy * (y - my);
                if k + 1 >= min_len {
                    cost[i * n + j] = (syy - sxy * sxy / sxx).max(0.0);
                }
            }
        }
        Self { n, min_len, cost }
    }

    #[inline]
    fn get(&self, i: usize, j: usize) -> f64 {
        self.cost[i * self.n + j]
    }

    /// `best[k][j]`: minimal RSS of splitting `0..=j` into `k + 1` segments.
    #[allow(clippy::needless_range_loop)]
    fn dynamic_program(&self, max_breaks: usize) -> DpTable {
        let n = self.n;
        let w = self.min_len;
        let mut best = vec![vec![f64::INFINITY; n]; max_breaks + 1];
        let mut split = vec![vec![usize::MAX; n]; max_breaks + 1];
        for j in (w - 1)..n {
            best[0][j] = self.get(0, j);
        }
        for k in 1..=max_breaks {
            for j in ((k + 1) * w - 1)..n {
                let mut b = f64::INFINITY;
                let mut arg = usize::MAX;
                // `i` is the last index of the previous segment; ascending
                // order plus a strict improvement test keeps the earliest
                // break on ties.
                for i in (k * w - 1)..=(j - w) {
                    let prev = best[k - 1][i];
                    if !prev.is_finite() {
                        continue;
                    }
                    let cand = prev + self.get(i + 1, j);
                    if cand < b - TIE_REL * b.abs() || !b.is_finite() {
                        b = cand;
                        arg = i;
                    }
                }
                best[k][j] = b;
                split[k][j] = arg;
            }
        }
        DpTable { n, best, split }
    }
}

struct DpTable {
    n: usize,
    best: Vec<Vec<f64>>,
    split: Vec<Vec<usize>>,
}

impl DpTable {
    fn total(&self, m: usize) -> f64 {
        self.best[m][self.n - 1]
    }

    fn breakpoints(&self, m: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(m);
        let mut j = self.n - 1;
        for k in (1..=m).rev() {
            let i = self.split[k][j];
            out.push(i + 1);
            j = i;
        }
        out.reverse();
        out
    }
}
