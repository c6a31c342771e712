//! Burned-area map validation: confusion matrices and overall accuracy,
//! whole-region and stratified by per-pixel missing-data fraction.

use std::fmt::Write as _;
use std::ops::Add;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ConfusionMatrix {
    pub true_burned_pred_burned: u64,
    pub true_burned_pred_unburned: u64,
    pub true_unburned_pred_burned: u64,
    pub true_unburned_pred_unburned: u64,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.true_burned_pred_burned
            + self.true_burned_pred_unburned
            + self.true_unburned_pred_burned
            + self.true_unburned_pred_unburned
    }

    pub fn agreements(&self) -> u64 {
        self.true_burned_pred_burned + self.true_unburned_pred_unburned
    }

    pub fn record(&mut self, pred: bool, reference: bool) {
        match (reference, pred) {
            (true, true) => self.true_burned_pred_burned += 1,
            (true, false) => self.true_burned_pred_unburned += 1,
            (false, true) => self.true_unburned_pred_burned += 1,
            (false, false) => self.true_unburned_pred_unburned += 1,
        }
    }
}

impl Add for ConfusionMatrix {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self {
            true_burned_pred_burned: self.true_burned_pred_burned + o.true_burned_pred_burned,
            true_burned_pred_unburned: self.true_burned_pred_unburned + o.true_burned_pred_unburned,
            true_unburned_pred_burned: self.true_unburned_pred_burned + o.true_unburned_pred_burned,
            true_unburned_pred_unburned: self.true_unburned_pred_unburned
                + o.true_unburned_pred_unburned,
        }
    }
}

/// Cross-tabulate `pred` against `reference` over pixels where `region` holds.
pub fn confusion(pred: &[bool], reference: &[bool], region: &[bool]) -> Result<ConfusionMatrix> {
    if pred.len() != reference.len() || pred.len() != region.len() {
        return Err(Error::domain(format!(
            "plane sizes differ: pred {}, ref {}, region {}",
            pred.len(),
            reference.len(),
            region.len()
        )));
    }
    let mut m = ConfusionMatrix::default();
    for ((&p, &r), _) in pred.iter().zip(reference).zip(region).filter(|(_, &g)| g) {
        m.record(p, r);
    }
    Ok(m)
}

pub fn overall_accuracy(m: &ConfusionMatrix) -> Result<f64> {
    match m.total() {
        0 => Err(Error::domain("overall accuracy of an empty confusion matrix")),
        t => Ok(m.agreements() as f64 / t as f64),
    }
}

/// Closed missing-fraction intervals defining the quality strata.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrataBounds {
    pub poor: [f64; 2],
    pub moderate: [f64; 2],
}

impl Default for StrataBounds {
    fn default() -> Self {
        Self {
            poor: [0.50, 0.53],
            moderate: [0.47, 0.49],
        }
    }
}

impl StrataBounds {
    pub fn validate(&self) -> Result<()> {
        for (name, [lo, hi]) in [("poor", self.poor), ("moderate", self.moderate)] {
            if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) || lo > hi {
                return Err(Error::config(format!(
                    "`{name}` bounds [{lo}, {hi}] must be ordered fractions in [0, 1]"
                )));
            }
        }
        let overlap = self.poor[0] <= self.moderate[1] && self.moderate[0] <= self.poor[1];
        if overlap {
            return Err(Error::config("`poor` and `moderate` intervals overlap"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stratum {
    Poor,
    Moderate,
    Other,
}

/// Percent at two decimals, as an integer number of hundredths.
fn hundredths_of_percent(frac: f64) -> i64 {
    (frac * 10_000.0).round() as i64
}

fn within(frac: i64, [lo, hi]: [f64; 2]) -> bool {
    hundredths_of_percent(lo) <= frac && frac <= hundredths_of_percent(hi)
}

/// Quality stratum of one pixel. NaN (nodata) falls in `Other`.
pub fn stratum_of(missing_frac: f64, bounds: &StrataBounds) -> Stratum {
    if missing_frac.is_nan() {
        return Stratum::Other;
    }
    let p = hundredths_of_percent(missing_frac);
    if within(p, bounds.poor) {
        Stratum::Poor
    } else if within(p, bounds.moderate) {
        Stratum::Moderate
    } else {
        Stratum::Other
    }
}

/// Disjoint masks partitioning the plane.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QualityStrata {
    pub poor: Vec<bool>,
    pub moderate: Vec<bool>,
    pub other: Vec<bool>,
}

pub fn stratify(missing_frac: &[f64], bounds: &StrataBounds) -> QualityStrata {
    let s: Vec<Stratum> = missing_frac.iter().map(|&f| stratum_of(f, bounds)).collect();
    let mask = |k: Stratum| s.iter().map(|&x| x == k).collect();
    QualityStrata {
        poor: mask(Stratum::Poor),
        moderate: mask(Stratum::Moderate),
        other: mask(Stratum::Other),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AccuracyRow {
    pub stratum: &'static str,
    pub matrix: ConfusionMatrix,
}

impl AccuracyRow {
    pub fn accuracy(&self) -> Option<f64> {
        overall_accuracy(&self.matrix).ok()
    }
}

/// Rows for the whole region and the poor / moderate strata.
pub fn assess(
    pred: &[bool],
    reference: &[bool],
    region: &[bool],
    missing_frac: &[f64],
    bounds: &StrataBounds,
) -> Result<Vec<AccuracyRow>> {
    if missing_frac.len() != region.len() {
        return Err(Error::domain(format!(
            "missing-fraction plane has {} pixels, region {}",
            missing_frac.len(),
            region.len()
        )));
    }
    bounds.validate()?;
    let strata = stratify(missing_frac, bounds);
    let restrict = |m: &[bool]| -> Vec<bool> { m.iter().zip(region).map(|(&a, &b)| a && b).collect() };
    Ok(vec![
        AccuracyRow {
            stratum: "whole",
            matrix: confusion(pred, reference, region)?,
        },
        AccuracyRow {
            stratum: "poor",
            matrix: confusion(pred, reference, &restrict(&strata.poor))?,
        },
        AccuracyRow {
            stratum: "moderate",
            matrix: confusion(pred, reference, &restrict(&strata.moderate))?,
        },
    ])
}

pub const ACCURACY_CSV_HEADER: &str = "stratum,n_pixels,overall_accuracy";

pub fn accuracy_csv(rows: &[AccuracyRow]) -> String {
    let mut out = format!("# {}\n{ACCURACY_CSV_HEADER}\n", crate::TOOL_VERSION);
    for r in rows {
        let acc = r.accuracy().map(|a| format!("{a:.6}")).unwrap_or_default();
        let _ = writeln!(out, "{},{},{}", r.stratum, r.matrix.total(), acc);
    }
    out
}
