//! Synthetic series and the Monte Carlo harness for detector performance
//! studies.
//!
//! Each replicate draws a 14-year (322-sample) series
//! `y_t = T_t + a cos(2 pi t / 23 - phase) + e_t`, masks `P` samples chosen
//! without replacement, gap-fills and runs the detector. Replicates are
//! independent and seeded per index, so metrics do not depend on thread
//! count or scheduling.

use std::f64::consts::PI;
use std::fmt::Write as _;

use rand::seq::index::sample;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::breakdetect::{detect_with_table, CriticalValueTable};
use crate::error::{Error, Result};
use crate::gapfill::FillMethod;
use crate::model::{DetectorConfig, PiecewiseTrend, SampledSeries};
use crate::seeding::{stream_rng, Stream};

/// Length of every simulated series: 2003-2016 at 23 samples per year.
pub const SIM_LENGTH: usize = 322;
pub const SIM_START_YEAR: i32 = 2003;
/// True break of the one-break study.
pub const ONE_BREAK_TAU: usize = 161;
/// First break of the two-break study.
pub const TWO_BREAK_TAU1: usize = 100;

/// Trend structure of a simulation scenario.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TrendSpec {
    /// Constant 0.7 up to t = 161, then `0.3 + 0.2 t / 161`.
    OneBreak,
    /// `T_t = 0`.
    NoChange,
    /// Breaks at `τ1 = 100` and `τ2 = 100 + separation`: constant 0.7, then
    /// `0.3 + 0.2 t / 161`, then the same line restarted at `τ2`,
    /// `0.3 + 0.2 (t - τ2) / 161`. Without the restart the last two segments
    /// would coincide and `τ2` would not be a change at all.
    TwoBreak { separation: usize },
}

impl TrendSpec {
    pub fn name(&self) -> &'static str {
        match self {
            TrendSpec::OneBreak => "one_break",
            TrendSpec::NoChange => "no_change",
            TrendSpec::TwoBreak { .. } => "two_break",
        }
    }

    pub fn true_breaks(&self) -> Vec<usize> {
        match *self {
            TrendSpec::OneBreak => vec![ONE_BREAK_TAU],
            TrendSpec::NoChange => Vec::new(),
            TrendSpec::TwoBreak { separation } => {
                vec![TWO_BREAK_TAU1, TWO_BREAK_TAU1 + separation]
            }
        }
    }

    pub fn trend(&self) -> Result<PiecewiseTrend> {
        let slope = 0.2 / 161.0;
        match *self {
            TrendSpec::OneBreak => PiecewiseTrend::new(
                SIM_LENGTH,
                vec![ONE_BREAK_TAU],
                vec![0.7, 0.3],
                vec![0.0, slope],
            ),
            TrendSpec::NoChange => Ok(PiecewiseTrend::linear(SIM_LENGTH, 0.0, 0.0)),
            TrendSpec::TwoBreak { separation } => PiecewiseTrend::new(
                SIM_LENGTH,
                vec![TWO_BREAK_TAU1, TWO_BREAK_TAU1 + separation],
                vec![0.7, 0.3, 0.3 - slope * (TWO_BREAK_TAU1 + separation) as f64],
                vec![0.0, slope, slope],
            ),
        }
    }
}

/// One cell of a simulation grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SimScenario {
    pub amplitude: f64,
    /// Phase angle in degrees.
    pub phase_deg: f64,
    pub sigma: f64,
    pub trend: TrendSpec,
    /// Number of masked samples, `P`.
    pub missing_count: usize,
    pub fill: FillMethod,
    pub h: f64,
    pub replicates: usize,
    pub seed: u64,
    pub alpha: f64,
    pub harmonic_order: usize,
}

impl SimScenario {
    /// One-break scenario with the usual defaults (phase 0, alpha 0.05).
    pub fn new(trend: TrendSpec, amplitude: f64, sigma: f64, h: f64) -> Self {
        let det = DetectorConfig::default();
        Self {
            amplitude,
            phase_deg: 0.0,
            sigma,
            trend,
            missing_count: 0,
            fill: FillMethod::Linear,
            h,
            replicates: 1000,
            seed: 1,
            alpha: det.significance_alpha,
            harmonic_order: det.harmonic_order,
        }
    }

    pub fn with_missing(mut self, p: usize) -> Self {
        self.missing_count = p;
        self
    }

    pub fn with_fill(mut self, fill: FillMethod) -> Self {
        self.fill = fill;
        self
    }

    pub fn with_replicates(mut self, replicates: usize) -> Self {
        self.replicates = replicates;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn detector_config(&self) -> DetectorConfig {
        DetectorConfig {
            bandwidth_h: self.h,
            significance_alpha: self.alpha,
            harmonic_order: self.harmonic_order,
            ..DetectorConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            problems.push(format!("sigma = {} must be > 0", self.sigma));
        }
        if !self.amplitude.is_finite() {
            problems.push(format!("amplitude = {} must be finite", self.amplitude));
        }
        if self.missing_count >= SIM_LENGTH {
            problems.push(format!(
                "missing count {} must be below {SIM_LENGTH}",
                self.missing_count
            ));
        }
        if let TrendSpec::TwoBreak { separation } = self.trend {
            if separation == 0 || TWO_BREAK_TAU1 + separation >= SIM_LENGTH {
                problems.push(format!("two-break separation {separation} out of range"));
            }
        }
        if let Err(e) = self.detector_config().validate(SIM_LENGTH) {
            problems.push(e.to_string());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::config(problems.join("; ")))
        }
    }
}

/// Draw the complete (unmasked) series of replicate `replicate`.
pub fn synth_series(scenario: &SimScenario, replicate: u64) -> Result<SampledSeries> {
    let noise = Normal::new(0.0, scenario.sigma)
        .map_err(|e| Error::config(format!("sigma {}: {e}", scenario.sigma)))?;
    let trend = scenario.trend.trend()?.fitted();
    let phase = scenario.phase_deg.to_radians();
    let mut rng = stream_rng(scenario.seed, replicate, Stream::Noise);
    let values = (1..=SIM_LENGTH)
        .map(|t| {
            let season = scenario.amplitude * (2.0 * PI * t as f64 / 23.0 - phase).cos();
            trend[t - 1] + season + noise.sample(&mut rng)
        })
        .collect();
    SampledSeries::complete(values, SIM_START_YEAR)
}

/// Mask exactly `missing` positions, chosen uniformly without replacement
/// from the currently observed ones.
pub fn apply_missing(
    series: &SampledSeries,
    missing: usize,
    seed: u64,
    replicate: u64,
) -> Result<SampledSeries> {
    let n = series.len();
    if missing >= n {
        return Err(Error::domain(format!(
            "cannot mask {missing} of {n} samples"
        )));
    }
    let observed: Vec<usize> = (0..n).filter(|&i| series.mask()[i]).collect();
    if missing > observed.len() {
        return Err(Error::domain(format!(
            "cannot mask {missing} samples, only {} observed",
            observed.len()
        )));
    }
    let mut rng = stream_rng(seed, replicate, Stream::Mask);
    let mut mask = series.mask().to_vec();
    for k in sample(&mut rng, observed.len(), missing) {
        mask[observed[k]] = false;
    }
    series.with_mask(mask)
}

/// Per-replicate outcome; `None` means the detector failed.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateOutcome {
    pub breakpoints: Option<Vec<usize>>,
}

/// Run one replicate: synthesise, mask, detect.
pub fn run_replicate(
    scenario: &SimScenario,
    replicate: u64,
    table: &CriticalValueTable,
) -> ReplicateOutcome {
    let cfg = scenario.detector_config();
    let result = synth_series(scenario, replicate)
        .and_then(|s| apply_missing(&s, scenario.missing_count, scenario.seed, replicate))
        .and_then(|s| detect_with_table(&s, &cfg, scenario.fill, table));
    match result {
        Ok(r) => ReplicateOutcome {
            breakpoints: Some(r.breakpoints),
        },
        Err(e) => {
            log::warn!("replicate {replicate} failed: {e}");
            ReplicateOutcome { breakpoints: None }
        }
    }
}

/// Monte Carlo metrics of one scenario. Conditional metrics are `None` when
/// their conditioning event never occurred.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimMetrics {
    pub replicates: usize,
    /// Replicates where exactly the true number of breaks was detected.
    pub coverage: f64,
    /// Among replicates with the true number of breaks, the fraction dating
    /// every break exactly.
    pub correct_estimation: Option<f64>,
    /// Fraction of replicates with at least one detected break (meaningful
    /// for no-change scenarios).
    pub false_negative_rate: f64,
    /// Mean squared dating error over replicates with exactly one detected
    /// break (one-break scenarios).
    pub mse: Option<f64>,
    /// Two-break scenarios, among replicates with one detected break: that
    /// break is one of the true breaks.
    pub under_one: Option<f64>,
    /// Among replicates with two detected breaks: exactly one true break hit.
    pub under_two: Option<f64>,
    /// Among replicates with more than two detected breaks: at least one
    /// true break hit.
    pub under_more: Option<f64>,
    /// Fraction of replicates with more breaks than the truth.
    pub overestimation: f64,
    pub failures: usize,
    /// Histogram of detected break counts, index = count.
    pub break_counts: Vec<usize>,
}

/// Partial tallies; merging is associative and commutative.
#[derive(Debug, Clone, Default, PartialEq)]
struct Tally {
    total: usize,
    failures: usize,
    counts: Vec<usize>,
    exact_target: usize,
    exact_target_correct: usize,
    any_break: usize,
    one_break: usize,
    sq_err: u64,
    under: [(usize, usize); 3],
    over: usize,
}

impl Tally {
    fn record(&mut self, truth: &[usize], outcome: &ReplicateOutcome) {
        self.total += 1;
        let Some(found) = &outcome.breakpoints else {
            self.failures += 1;
            return;
        };
        let k = found.len();
        if self.counts.len() <= k {
            self.counts.resize(k + 1, 0);
        }
        self.counts[k] += 1;
        if k > 0 {
            self.any_break += 1;
        }
        if k > truth.len() {
            self.over += 1;
        }
        if k == truth.len() {
            self.exact_target += 1;
            if found.as_slice() == truth {
                self.exact_target_correct += 1;
            }
        }
        if k == 1 && truth.len() == 1 {
            self.one_break += 1;
            let d = found[0].abs_diff(truth[0]) as u64;
            self.sq_err += d * d;
        }
        if truth.len() == 2 && k >= 1 {
            let hits = truth.iter().filter(|t| found.contains(t)).count();
            let (bucket, hit) = match k {
                1 => (0, hits == 1),
                2 => (1, hits == 1),
                _ => (2, hits >= 1),
            };
            self.under[bucket].0 += 1;
            if hit {
                self.under[bucket].1 += 1;
            }
        }
    }

    fn merge(mut self, other: Tally) -> Tally {
        self.total += other.total;
        self.failures += other.failures;
        if self.counts.len() < other.counts.len() {
            self.counts.resize(other.counts.len(), 0);
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.exact_target += other.exact_target;
        self.exact_target_correct += other.exact_target_correct;
        self.any_break += other.any_break;
        self.one_break += other.one_break;
        self.sq_err += other.sq_err;
        for (a, b) in self.under.iter_mut().zip(other.under) {
            a.0 += b.0;
            a.1 += b.1;
        }
        self.over += other.over;
        self
    }

    fn metrics(&self, truth: &[usize]) -> SimMetrics {
        let frac = |num: usize, den: usize| {
            if den == 0 {
                None
            } else {
                Some(num as f64 / den as f64)
            }
        };
        let total = self.total.max(1) as f64;
        let two = truth.len() == 2;
        SimMetrics {
            replicates: self.total,
            coverage: self.exact_target as f64 / total,
            correct_estimation: frac(self.exact_target_correct, self.exact_target),
            false_negative_rate: self.any_break as f64 / total,
            mse: if truth.len() == 1 && self.one_break > 0 {
                Some(self.sq_err as f64 / self.one_break as f64)
            } else {
                None
            },
            under_one: two.then(|| frac(self.under[0].1, self.under[0].0)).flatten(),
            under_two: two.then(|| frac(self.under[1].1, self.under[1].0)).flatten(),
            under_more: two.then(|| frac(self.under[2].1, self.under[2].0)).flatten(),
            overestimation: self.over as f64 / total,
            failures: self.failures,
            break_counts: self.counts.clone(),
        }
    }
}

/// Run every replicate of `scenario` with the bundled critical values.
pub fn run_experiment(scenario: &SimScenario) -> Result<SimMetrics> {
    run_experiment_with_table(scenario, CriticalValueTable::builtin())
}

pub fn run_experiment_with_table(
    scenario: &SimScenario,
    table: &CriticalValueTable,
) -> Result<SimMetrics> {
    scenario.validate()?;
    table.lookup(scenario.h, scenario.alpha)?;
    let truth = scenario.trend.true_breaks();
    // Every tally field is an integer count, so the reduction order cannot
    // change the result.
    let tally = (0..scenario.replicates as u64)
        .into_par_iter()
        .map(|r| run_replicate(scenario, r, table))
        .fold(Tally::default, |mut t, o| {
            t.record(&truth, &o);
            t
        })
        .reduce(Tally::default, Tally::merge);
    Ok(tally.metrics(&truth))
}

/// Trend entry of a grid configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TrendGridEntry {
    OneBreak,
    NoChange,
    TwoBreak { separations: Vec<usize> },
}

/// Experiment grid: the Cartesian product of all lists.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimGrid {
    pub trends: Vec<TrendGridEntry>,
    pub amplitudes: Vec<f64>,
    pub sigmas: Vec<f64>,
    pub bandwidths: Vec<f64>,
    pub missing_counts: Vec<usize>,
    pub fills: Vec<String>,
    #[serde(default)]
    pub phase_deg: f64,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_harmonics")]
    pub harmonic_order: usize,
}

fn default_replicates() -> usize {
    1000
}
fn default_seed() -> u64 {
    1
}
fn default_alpha() -> f64 {
    0.05
}
fn default_harmonics() -> usize {
    DetectorConfig::default().harmonic_order
}

impl SimGrid {
    /// The one-break grid: 3 amplitudes x 3 bandwidths x 2 fills x 7 P.
    pub fn one_break_default() -> Self {
        Self {
            trends: vec![TrendGridEntry::OneBreak],
            amplitudes: vec![0.15, 0.3, 0.45],
            sigmas: vec![0.02],
            bandwidths: vec![0.15, 0.23, 0.45],
            missing_counts: vec![0, 32, 64, 97, 129, 161, 194],
            fills: vec!["linear".into(), "spline".into()],
            phase_deg: 0.0,
            replicates: default_replicates(),
            seed: default_seed(),
            alpha: default_alpha(),
            harmonic_order: default_harmonics(),
        }
    }

    /// Expand into scenarios; every invalid field is reported at once.
    pub fn scenarios(&self) -> Result<Vec<SimScenario>> {
        let mut problems = Vec::new();
        for (name, len) in [
            ("trends", self.trends.len()),
            ("amplitudes", self.amplitudes.len()),
            ("sigmas", self.sigmas.len()),
            ("bandwidths", self.bandwidths.len()),
            ("missing_counts", self.missing_counts.len()),
            ("fills", self.fills.len()),
        ] {
            if len == 0 {
                problems.push(format!("`{name}` is empty"));
            }
        }
        let mut fills = Vec::new();
        for f in &self.fills {
            match f.parse::<FillMethod>() {
                Ok(m) => fills.push(m),
                Err(_) => problems.push(format!("`fills`: unknown method `{f}`")),
            }
        }
        if self.replicates == 0 {
            problems.push("`replicates` must be > 0".into());
        }
        if let Some(s) = self.sigmas.iter().find(|s| !(s.is_finite() && **s > 0.0)) {
            problems.push(format!("`sigmas`: {s} is not > 0"));
        }
        if let Some(p) = self.missing_counts.iter().find(|&&p| p >= SIM_LENGTH) {
            problems.push(format!("`missing_counts`: {p} >= {SIM_LENGTH}"));
        }
        if let Some(h) = self.bandwidths.iter().find(|h| !(**h > 0.0 && **h < 1.0)) {
            problems.push(format!("`bandwidths`: {h} outside (0, 1)"));
        } else if self.alpha > 0.0 && self.alpha < 1.0 {
            let table = CriticalValueTable::builtin();
            if let Some(h) = self.bandwidths.iter().find(|&&h| table.lookup(h, self.alpha).is_err()) {
                problems.push(format!(
                    "`bandwidths`: no critical value tabulated for h = {h}, alpha = {}",
                    self.alpha
                ));
            }
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            problems.push(format!("`alpha`: {} outside (0, 1)", self.alpha));
        }
        if !(1..=4).contains(&self.harmonic_order) {
            problems.push(format!("`harmonic_order`: {} outside 1..=4", self.harmonic_order));
        }
        for t in &self.trends {
            if let TrendGridEntry::TwoBreak { separations } = t {
                if separations.is_empty() {
                    problems.push("`two_break.separations` is empty".into());
                }
                if let Some(l) = separations
                    .iter()
                    .find(|&&l| l == 0 || TWO_BREAK_TAU1 + l >= SIM_LENGTH)
                {
                    problems.push(format!("`two_break.separations`: {l} out of range"));
                }
            }
        }
        if !problems.is_empty() {
            return Err(Error::config(format!(
                "invalid simulation grid: {}",
                problems.join("; ")
            )));
        }

        let trends: Vec<TrendSpec> = self
            .trends
            .iter()
            .flat_map(|t| match t {
                TrendGridEntry::OneBreak => vec![TrendSpec::OneBreak],
                TrendGridEntry::NoChange => vec![TrendSpec::NoChange],
                TrendGridEntry::TwoBreak { separations } => separations
                    .iter()
                    .map(|&separation| TrendSpec::TwoBreak { separation })
                    .collect(),
            })
            .collect();

        let mut out = Vec::new();
        for &trend in &trends {
            for &amplitude in &self.amplitudes {
                for &sigma in &self.sigmas {
                    for &h in &self.bandwidths {
                        for &fill in &fills {
                            for &p in &self.missing_counts {
                                out.push(SimScenario {
                                    amplitude,
                                    phase_deg: self.phase_deg,
                                    sigma,
                                    trend,
                                    missing_count: p,
                                    fill,
                                    h,
                                    replicates: self.replicates,
                                    seed: self.seed,
                                    alpha: self.alpha,
                                    harmonic_order: self.harmonic_order,
                                });
                            }
                        }
                    }
                }
            }
        }
        Ok(out)
    }
}

pub const METRICS_CSV_HEADER: &str = "trend,separation,amplitude,sigma,h,fill,missing_count,\
missing_pct,replicates,seed,coverage,correct_estimation,false_negative_rate,mse,under_one,\
under_two,under_more,overestimation,failures";

/// Metrics CSV with a version comment line and one row per scenario.
pub fn metrics_csv(rows: &[(SimScenario, SimMetrics)]) -> String {
    let opt = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
    let mut out = format!("# {}\n{METRICS_CSV_HEADER}\n", crate::TOOL_VERSION);
    for (s, m) in rows {
        let separation = match s.trend {
            TrendSpec::TwoBreak { separation } => separation.to_string(),
            _ => String::new(),
        };
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{:.1},{},{},{:.6},{},{:.6},{},{},{},{},{:.6},{}",
            s.trend.name(),
            separation,
            s.amplitude,
            s.sigma,
            s.h,
            s.fill,
            s.missing_count,
            100.0 * s.missing_count as f64 / SIM_LENGTH as f64,
            m.replicates,
            s.seed,
            m.coverage,
            opt(m.correct_estimation),
            m.false_negative_rate,
            opt(m.mse),
            opt(m.under_one),
            opt(m.under_two),
            opt(m.under_more),
            m.overestimation,
            m.failures,
        );
    }
    out
}

/// Run every scenario of a grid in order.
pub fn run_grid(grid: &SimGrid) -> Result<Vec<(SimScenario, SimMetrics)>> {
    grid.scenarios()?
        .into_iter()
        .map(|s| run_experiment(&s).map(|m| (s, m)))
        .collect()
}

/// Synthetic band stack with planted disturbances, for end-to-end runs.
///
/// NDVI is `0.7 + season` until the first break; after each break `τ` it
/// drops to `0.3 + 0.2 (t - τ) / 161`. NBR falls from 0.5 to 0.1 at each
/// break and recovers linearly. Masked samples are NaN in every band.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub width: usize,
    pub height: usize,
    pub amplitude: f64,
    pub sigma: f64,
    /// Samples masked per pixel, chosen independently for each pixel.
    pub missing_count: usize,
    pub seed: u64,
    /// Break indices per pixel, row-major; empty means undisturbed.
    pub events: Vec<Vec<usize>>,
    /// Pixels without a single valid observation.
    pub empty_pixels: Vec<usize>,
}

const SCENE_NIR: f64 = 0.4;
const NBR_PRE: f64 = 0.5;
const NBR_POST: f64 = 0.1;

impl SceneSpec {
    pub fn undisturbed(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            amplitude: 0.15,
            sigma: 0.0,
            missing_count: 0,
            seed: 1,
            events: vec![Vec::new(); width * height],
            empty_pixels: Vec::new(),
        }
    }

    /// Pixels with a planted break dated to `year`.
    pub fn disturbed_in(&self, year: i32) -> Vec<bool> {
        self.events
            .iter()
            .enumerate()
            .map(|(p, ev)| {
                !self.empty_pixels.contains(&p)
                    && ev.iter().any(|&tau| {
                        SIM_START_YEAR + ((tau - 1) / crate::model::CADENCE) as i32 == year
                    })
            })
            .collect()
    }
}

/// Noise-free NDVI and NBR of a pixel with breaks `events`.
pub fn scene_pixel_indices(events: &[usize], amplitude: f64) -> (Vec<f64>, Vec<f64>) {
    let slope = 0.2 / 161.0;
    (1..=SIM_LENGTH)
        .map(|t| {
            let season = (2.0 * PI * t as f64 / 23.0).cos();
            match events.iter().rev().find(|&&tau| tau < t) {
                None => (0.7 + amplitude * season, NBR_PRE + amplitude / 3.0 * season),
                Some(&tau) => {
                    let dt = (t - tau) as f64;
                    let nbr = (NBR_POST + 2.0 * slope * dt).min(NBR_PRE);
                    (0.3 + slope * dt + amplitude * season, nbr + amplitude / 3.0 * season)
                }
            }
        })
        .unzip()
}

/// Write band planes and a `stack.json` manifest under `dir`; returns the
/// manifest path.
pub fn write_scene(spec: &SceneSpec, dir: &std::path::Path) -> Result<std::path::PathBuf> {
    use crate::raster::{DateEntry, Plane, StackManifest};

    let pixels = spec.width * spec.height;
    if spec.events.len() != pixels {
        return Err(Error::config(format!(
            "scene has {pixels} pixels but {} event lists",
            spec.events.len()
        )));
    }
    if spec.missing_count >= SIM_LENGTH || spec.sigma.is_nan() || spec.sigma < 0.0 {
        return Err(Error::config("scene missing_count or sigma out of range"));
    }
    let noise = Normal::new(0.0, spec.sigma).map_err(|e| Error::config(e.to_string()))?;
    let mut ndvi = Vec::with_capacity(pixels);
    let mut nbr = Vec::with_capacity(pixels);
    for (p, events) in spec.events.iter().enumerate() {
        let (mut v, mut u) = scene_pixel_indices(events, spec.amplitude);
        if spec.empty_pixels.contains(&p) {
            v.fill(f64::NAN);
            u.fill(f64::NAN);
        } else {
            let mut rng = stream_rng(spec.seed, p as u64, Stream::Scene);
            if spec.sigma > 0.0 {
                for x in v.iter_mut().chain(u.iter_mut()) {
                    *x += noise.sample(&mut rng);
                }
            }
            let mut mask_rng = stream_rng(spec.seed, p as u64, Stream::Mask);
            for i in sample(&mut mask_rng, SIM_LENGTH, spec.missing_count) {
                v[i] = f64::NAN;
                u[i] = f64::NAN;
            }
        }
        ndvi.push(v);
        nbr.push(u);
    }

    let bands = dir.join("bands");
    std::fs::create_dir_all(&bands).map_err(|e| Error::io(&bands, e))?;
    // Reflectances reproducing the target indices with NIR held fixed.
    let other_band = |x: f64| (SCENE_NIR * (1.0 - x) / (1.0 + x)) as f32;
    let mut dates = Vec::with_capacity(SIM_LENGTH);
    for d in 0..SIM_LENGTH {
        let plane = |f: &dyn Fn(usize) -> f32| {
            Plane::new(spec.width, spec.height, (0..pixels).map(f).collect())
        };
        let red = plane(&|p| other_band(ndvi[p][d]))?;
        let nir = plane(&|p| if ndvi[p][d].is_nan() { f32::NAN } else { SCENE_NIR as f32 })?;
        let swir2 = plane(&|p| other_band(nbr[p][d]))?;
        let mut paths = Vec::new();
        for (name, pl) in [("red", &red), ("nir", &nir), ("swir2", &swir2)] {
            let rel = std::path::PathBuf::from(format!("bands/d{:03}_{name}.f32", d + 1));
            let abs = dir.join(&rel);
            std::fs::write(&abs, pl.to_bytes()).map_err(|e| Error::io(&abs, e))?;
            paths.push(rel);
        }
        let swir2 = paths.pop().expect("three bands");
        let nir = paths.pop().expect("three bands");
        let red = paths.pop().expect("three bands");
        dates.push(DateEntry {
            year: SIM_START_YEAR + (d / 23) as i32,
            step: d % 23 + 1,
            red,
            nir,
            swir2,
        });
    }
    let manifest = StackManifest {
        width: spec.width,
        height: spec.height,
        pixel_area_ha: crate::severity::DEFAULT_PIXEL_AREA_HA,
        start_year: Some(SIM_START_YEAR),
        n_years: Some(SIM_LENGTH / 23),
        dates,
        base_dir: dir.to_path_buf(),
    };
    let path = dir.join("stack.json");
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    std::fs::write(&path, json + "\n").map_err(|e| Error::io(&path, e))?;
    Ok(path)
}
