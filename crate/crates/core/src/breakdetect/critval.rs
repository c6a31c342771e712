use std::fmt::Write as _;
use std::path::Path;
use std::sync::OnceLock;

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::mosum::linear_residuals;
use crate::error::{Error, Result};
use crate::model::window_len;
use crate::seeding::{stream_rng, Stream};

const FORMAT_VERSION: u32 = 1;
const KEY_TOL: f64 = 1e-9;

static BUILTIN_TEXT: &str = include_str!("../../data/mosum_critvals.txt");
static BUILTIN: OnceLock<CriticalValueTable> = OnceLock::new();

/// One tabulated boundary: reject when `max_j |M_j| > value`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriticalValue {
    pub h: f64,
    pub alpha: f64,
    pub value: f64,
}

/// Settings for regenerating the critical-value table.
#[derive(Debug, Clone, PartialEq)]
pub struct CritvalSpec {
    pub bandwidths: Vec<f64>,
    pub alphas: Vec<f64>,
    /// Length of the simulated null series.
    pub reference_length: usize,
    pub replicates: usize,
    pub seed: u64,
}

impl Default for CritvalSpec {
    fn default() -> Self {
        Self {
            bandwidths: vec![
                0.05, 0.10, 0.15, 0.20, 0.23, 0.25, 0.30, 0.35, 0.40, 0.45, 0.50,
            ],
            alphas: vec![0.01, 0.025, 0.05, 0.10],
            reference_length: 322,
            replicates: 200_000,
            seed: 20_030_101,
        }
    }
}

/// OLS-MOSUM critical values keyed by `(h, alpha)`.
///
/// Values are empirical upper quantiles of `max_j |M_j|` over simulated
/// Gaussian no-change series. Lookups are exact: a bandwidth that is not
/// tabulated is a configuration error, never an interpolation.
#[derive(Debug, Clone, PartialEq)]
pub struct CriticalValueTable {
    pub reference_length: usize,
    pub replicates: usize,
    pub seed: u64,
    rows: Vec<CriticalValue>,
}

impl CriticalValueTable {
    /// The table shipped with the crate.
    pub fn builtin() -> &'static CriticalValueTable {
        BUILTIN.get_or_init(|| {
            Self::parse(BUILTIN_TEXT, Path::new("data/mosum_critvals.txt"))
                .expect("bundled critical-value table is well formed")
        })
    }

    pub fn rows(&self) -> &[CriticalValue] {
        &self.rows
    }

    pub fn lookup(&self, h: f64, alpha: f64) -> Result<f64> {
        self.rows
            .iter()
            .find(|r| (r.h - h).abs() < KEY_TOL && (r.alpha - alpha).abs() < KEY_TOL)
            .map(|r| r.value)
            .ok_or_else(|| {
                let mut hs: Vec<f64> = self.rows.iter().map(|r| r.h).collect();
                hs.dedup();
                let mut alphas: Vec<f64> = self.rows.iter().map(|r| r.alpha).collect();
                alphas.sort_by(f64::total_cmp);
                alphas.dedup();
                Error::config(format!(
                    "no OLS-MOSUM critical value for h = {h}, alpha = {alpha}; \
                     tabulated h: {hs:?}, alpha: {alphas:?}"
                ))
            })
    }

    /// Simulate the null distribution of `max_j |M_j|` and tabulate its upper
    /// quantiles.
    pub fn generate(spec: &CritvalSpec) -> Result<Self> {
        let n = spec.reference_length;
        if spec.replicates == 0 {
            return Err(Error::config("critical-value simulation needs replicates > 0"));
        }
        for &h in &spec.bandwidths {
            let w = window_len(n, h);
            if !(h > 0.0 && h < 1.0) || w < 3 || w > n {
                return Err(Error::config(format!(
                    "bandwidth {h} unusable with reference length {n}"
                )));
            }
        }
        for &a in &spec.alphas {
            if !(a > 0.0 && a < 1.0) {
                return Err(Error::config(format!("alpha {a} outside (0, 1)")));
            }
        }
        let windows: Vec<usize> = spec.bandwidths.iter().map(|&h| window_len(n, h)).collect();

        let maxima: Vec<Vec<f64>> = (0..spec.replicates as u64)
            .into_par_iter()
            .map(|r| {
                let mut rng = stream_rng(spec.seed, r, Stream::NullSeries);
                let y: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
                null_maxima(&y, &windows)
            })
            .collect();

        let mut rows = Vec::new();
        for (col, &h) in spec.bandwidths.iter().enumerate() {
            let mut sample: Vec<f64> = maxima.iter().map(|m| m[col]).collect();
            sample.sort_by(f64::total_cmp);
            for &alpha in &spec.alphas {
                rows.push(CriticalValue {
                    h,
                    alpha,
                    value: upper_quantile(&sample, alpha),
                });
            }
        }
        Ok(Self {
            reference_length: n,
            replicates: spec.replicates,
            seed: spec.seed,
            rows,
        })
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# OLS-MOSUM critical values, {}", crate::TOOL_VERSION);
        let _ = writeln!(out, "# format_version={FORMAT_VERSION}");
        let _ = writeln!(out, "# reference_length={}", self.reference_length);
        let _ = writeln!(out, "# replicates={}", self.replicates);
        let _ = writeln!(out, "# seed={}", self.seed);
        out.push_str("h,alpha,critical_value\n");
        for r in &self.rows {
            let _ = writeln!(out, "{},{},{:.6}", r.h, r.alpha, r.value);
        }
        out
    }

    /// Parse the text format; `origin` is used in error messages only.
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let mut version = None;
        let mut reference_length = 0;
        let mut replicates = 0;
        let mut seed = 0;
        let mut rows = Vec::new();
        let mut seen_header = false;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let bad = |msg: String| Error::format(origin, format!("line {}: {msg}", lineno + 1));
            if let Some(meta) = line.strip_prefix('#') {
                if let Some((k, v)) = meta.trim().split_once('=') {
                    let v = v.trim();
                    let parsed = v.parse::<u64>().map_err(|e| bad(format!("{k}: {e}")));
                    match k.trim() {
                        "format_version" => version = Some(parsed?),
                        "reference_length" => reference_length = parsed? as usize,
                        "replicates" => replicates = parsed? as usize,
                        "seed" => seed = parsed?,
                        _ => {}
                    }
                }
                continue;
            }
            if !seen_header {
                if line != "h,alpha,critical_value" {
                    return Err(bad(format!("unexpected header `{line}`")));
                }
                seen_header = true;
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 3 {
                return Err(bad(format!("expected 3 fields, got {}", fields.len())));
            }
            let num = |s: &str| s.trim().parse::<f64>().map_err(|e| bad(format!("`{s}`: {e}")));
            rows.push(CriticalValue {
                h: num(fields[0])?,
                alpha: num(fields[1])?,
                value: num(fields[2])?,
            });
        }
        match version {
            Some(v) if v == FORMAT_VERSION as u64 => {}
            Some(v) => {
                return Err(Error::format(origin, format!("unsupported format_version {v}")))
            }
            None => return Err(Error::format(origin, "missing format_version")),
        }
        if rows.is_empty() {
            return Err(Error::format(origin, "no critical values"));
        }
        Ok(Self {
            reference_length,
            replicates,
            seed,
            rows,
        })
    }
}

/// Critical value from the bundled table.
pub fn mosum_critical_value(h: f64, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::config(format!("alpha {alpha} outside (0, 1)")));
    }
    CriticalValueTable::builtin().lookup(h, alpha)
}

/// `max_j |M_j|` of one null series for every window length.
fn null_maxima(y: &[f64], windows: &[usize]) -> Vec<f64> {
    let n = y.len();
    let r = linear_residuals(y);
    let sigma = (r.iter().map(|x| x * x).sum::<f64>() / (n - 2) as f64).sqrt();
    let norm = sigma * (n as f64).sqrt();
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0.0);
    let mut acc = 0.0;
    for v in &r {
        acc += v;
        prefix.push(acc);
    }
    windows
        .iter()
        .map(|&w| {
            (0..=n - w).fold(0.0f64, |m, j| m.max((prefix[j + w] - prefix[j]).abs())) / norm
        })
        .collect()
}

/// Order statistic at rank `ceil((1 - alpha) R)` of a sorted sample.
fn upper_quantile(sorted: &[f64], alpha: f64) -> f64 {
    let r = sorted.len();
    let rank = (((1.0 - alpha) * r as f64) - 1e-9).ceil().max(1.0) as usize;
    sorted[rank.min(r) - 1]
}
