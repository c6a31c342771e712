use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::{HarmonicModel, SampledSeries, CADENCE};

/// Least-squares fit of a mean level plus `order` harmonic pairs to a fully
/// observed series.
pub fn fit_harmonic(series: &SampledSeries, order: usize) -> Result<HarmonicModel> {
    if !series.is_complete() {
        return Err(Error::domain("harmonic fit needs a fully observed series"));
    }
    fit_harmonic_values(series.values(), order)
}

/// Slice-level harmonic fit; `values[i]` sits at position `t = i + 1`.
pub fn fit_harmonic_values(values: &[f64], order: usize) -> Result<HarmonicModel> {
    if order == 0 {
        return Err(Error::domain("harmonic order must be >= 1"));
    }
    let n = values.len();
    let p = 2 * order + 1;
    if n < p + 1 {
        return Err(Error::InsufficientData {
            observed: n,
            required: p + 1,
        });
    }

    // Normal equations; the basis is close to orthogonal on the regular grid.
    let mut row = vec![0.0; p];
    let mut xtx = DMatrix::<f64>::zeros(p, p);
    let mut xty = DVector::<f64>::zeros(p);
    for (i, &y) in values.iter().enumerate() {
        let phase = ((i + 1) % CADENCE) as f64 / CADENCE as f64;
        row[0] = 1.0;
        for k in 1..=order {
            let w = 2.0 * PI * k as f64 * phase;
            row[2 * k - 1] = w.cos();
            row[2 * k] = w.sin();
        }
        for a in 0..p {
            xty[a] += row[a] * y;
            for b in a..p {
                xtx[(a, b)] += row[a] * row[b];
            }
        }
    }
    for a in 0..p {
        for b in 0..a {
            xtx[(a, b)] = xtx[(b, a)];
        }
    }
    let chol = xtx
        .cholesky()
        .ok_or_else(|| Error::Numeric("rank-deficient harmonic design".into()))?;
    let coef = chol.solve(&xty);
    if coef.iter().any(|c| !c.is_finite()) {
        return Err(Error::Numeric("non-finite harmonic coefficients".into()));
    }
    let cos_coef = (1..=order).map(|k| coef[2 * k - 1]).collect();
    let sin_coef = (1..=order).map(|k| coef[2 * k]).collect();
    HarmonicModel::new(coef[0], cos_coef, sin_coef)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn cos_series(n: usize, mean: f64, amp: f64) -> Vec<f64> {
        (1..=n)
            .map(|t| mean + amp * (2.0 * PI * t as f64 / 23.0).cos())
            .collect()
    }

    #[test]
    fn recovers_exact_harmonic() {
        let m = fit_harmonic_values(&cos_series(322, 0.3, 0.15), 1).unwrap();
        assert!((m.mean_level() - 0.3).abs() < 1e-9);
        assert!((m.cos_coef()[0] - 0.15).abs() < 1e-9);
        assert!(m.sin_coef()[0].abs() < 1e-9);
    }

    #[test]
    fn recovers_higher_order_on_short_series() {
        let truth = HarmonicModel::new(0.1, vec![0.2, -0.05], vec![0.03, 0.08]).unwrap();
        let vals = truth.fitted(50);
        let m = fit_harmonic_values(&vals, 2).unwrap();
        assert!((m.mean_level() - 0.1).abs() < 1e-9);
        for k in 0..2 {
            assert!((m.cos_coef()[k] - truth.cos_coef()[k]).abs() < 1e-9);
            assert!((m.sin_coef()[k] - truth.sin_coef()[k]).abs() < 1e-9);
        }
    }

    #[test]
    fn constant_series() {
        let m = fit_harmonic_values(&vec![0.5; 322], 1).unwrap();
        assert!((m.mean_level() - 0.5).abs() < 1e-9);
        assert!(m.cos_coef()[0].abs() < 1e-9 && m.sin_coef()[0].abs() < 1e-9);
    }

    #[test]
    fn too_short() {
        assert!(matches!(
            fit_harmonic_values(&[0.1; 5], 2),
            Err(Error::InsufficientData { .. })
        ));
    }

    #[test]
    fn noisy_fit_within_standard_error_bound() {
        // Each coefficient has standard error about 0.02 * sqrt(2/322) = 0.02/sqrt(161);
        // a 3-SE band should hold in well over 99% of runs.
        let bound = 3.0 * 0.02 / 161f64.sqrt();
        let base = cos_series(322, 0.3, 0.15);
        let noise = Normal::new(0.0, 0.02).unwrap();
        let mut inside = 0;
        for seed in 0..1000u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let y: Vec<f64> = base.iter().map(|v| v + noise.sample(&mut rng)).collect();
            let m = fit_harmonic_values(&y, 1).unwrap();
            if (m.mean_level() - 0.3).abs() < bound
                && (m.cos_coef()[0] - 0.15).abs() < bound
                && m.sin_coef()[0].abs() < bound
            {
                inside += 1;
            }
        }
        assert!(inside >= 990, "{inside} of 1000 within bound");
    }
}
