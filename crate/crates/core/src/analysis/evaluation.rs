//! Held-out evaluation: χ² goodness of fit for count predictions and MSE.

use statrs::distribution::{ChiSquared, ContinuousCDF};

use super::AnalysisError;
use crate::predictive::PredictiveDistribution;

/// One category after merging: counts y in `lo..=hi` (`hi = None` means open-ended).
#[derive(Debug, Clone, PartialEq)]
pub struct GofBin {
    pub lo: usize,
    pub hi: Option<usize>,
    pub expected: f64,
    pub observed: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GofResult {
    pub stat: f64,
    pub df: usize,
    pub p_value: f64,
    pub bins: Vec<GofBin>,
}

/// Expected counts per y summed over per-row predictive pmfs, with the mass
/// beyond the shared grid added to the last category.
pub fn expected_counts(preds: &[PredictiveDistribution]) -> Vec<f64> {
    let len = preds.iter().map(|p| p.mass.len()).max().unwrap_or(0);
    let mut e = vec![0.0; len];
    for p in preds {
        for (ei, m) in e.iter_mut().zip(&p.mass) {
            *ei += m;
        }
        if let Some(last) = e.last_mut() {
            *last += (1.0 - p.mass.iter().sum::<f64>()).max(0.0);
        }
    }
    e
}

/// Observed counts per y on `0..len`, with larger values in the last category.
pub fn observed_counts(ys: &[f64], len: usize) -> Vec<f64> {
    let mut o = vec![0.0; len];
    if len == 0 {
        return o;
    }
    for &y in ys {
        let k = (y.max(0.0) as usize).min(len - 1);
        o[k] += 1.0;
    }
    o
}

/// Pearson χ² after merging categories from the right until every expected
/// count is at least 5. The last category is treated as open-ended.
pub fn chi_square_gof(expected: &[f64], observed: &[f64]) -> Result<GofResult, AnalysisError> {
    if expected.len() != observed.len() {
        return Err(AnalysisError::LengthMismatch { left: expected.len(), right: observed.len() });
    }
    if !(observed.iter().sum::<f64>() >= 1.0) {
        return Err(AnalysisError::InvalidParameter("no observations".into()));
    }
    let last = expected.len() - 1;
    let mut bins: Vec<GofBin> = Vec::new();
    let (mut e, mut o) = (0.0, 0.0);
    let mut hi = last;
    for y in (0..expected.len()).rev() {
        e += expected[y];
        o += observed[y];
        if e >= 5.0 {
            bins.push(GofBin { lo: y, hi: (hi != last).then_some(hi), expected: e, observed: o });
            (e, o) = (0.0, 0.0);
            hi = y.saturating_sub(1);
        }
    }
    if e > 0.0 || o > 0.0 {
        match bins.last_mut() {
            Some(b) => {
                b.lo = 0;
                b.expected += e;
                b.observed += o;
            }
            None => return Err(AnalysisError::TooFewBins { bins: 0 }),
        }
    }
    bins.reverse();
    if bins.len() < 2 {
        return Err(AnalysisError::TooFewBins { bins: bins.len() });
    }
    let stat: f64 = bins.iter().map(|b| (b.observed - b.expected).powi(2) / b.expected).sum();
    let df = bins.len() - 1;
    let dist = ChiSquared::new(df as f64).map_err(|e| AnalysisError::InvalidParameter(e.to_string()))?;
    let p_value = (1.0 - dist.cdf(stat)).clamp(0.0, 1.0);
    Ok(GofResult { stat, df, p_value, bins })
}

pub fn mse(predictions: &[f64], observed: &[f64]) -> Result<f64, AnalysisError> {
    if predictions.len() != observed.len() {
        return Err(AnalysisError::LengthMismatch { left: predictions.len(), right: observed.len() });
    }
    if predictions.is_empty() {
        return Err(AnalysisError::InvalidParameter("empty prediction vector".into()));
    }
    Ok(predictions.iter().zip(observed).map(|(p, o)| (p - o).powi(2)).sum::<f64>() / predictions.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn hand_example() {
        let r = chi_square_gof(&[50.0, 30.0, 20.0], &[45.0, 35.0, 20.0]).unwrap();
        assert_relative_eq!(r.stat, 25.0 / 50.0 + 25.0 / 30.0, epsilon = 1e-12);
        assert_eq!(r.df, 2);
        assert!((r.p_value - 0.513).abs() < 1e-3, "{}", r.p_value);
    }

    #[test]
    fn proportional_counts() {
        let r = chi_square_gof(&[60.0, 25.0, 10.0, 5.0], &[60.0, 25.0, 10.0, 5.0]).unwrap();
        assert_eq!(r.stat, 0.0);
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn small_tail_merged_into_three_categories() {
        let expected = [80.0, 12.0, 5.5, 1.8, 0.5, 0.2];
        let observed = [79.0, 14.0, 4.0, 2.0, 1.0, 0.0];
        let r = chi_square_gof(&expected, &observed).unwrap();
        assert_eq!(r.df, 2);
        assert_eq!(r.bins[2].lo, 2);
        assert_eq!(r.bins[2].hi, None);
        assert_relative_eq!(r.bins[2].expected, 8.0, epsilon = 1e-12);
        assert_eq!(r.bins[2].observed, 7.0);
    }

    #[test]
    fn too_few_bins() {
        assert!(matches!(chi_square_gof(&[3.0, 1.0], &[2.0, 2.0]), Err(AnalysisError::TooFewBins { .. })));
        assert!(matches!(chi_square_gof(&[3.0, 10.0], &[2.0, 2.0]), Err(AnalysisError::TooFewBins { .. })));
    }

    #[test]
    fn mse_examples() {
        assert_eq!(mse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(mse(&[1.0, 2.0], &[2.0, 4.0]).unwrap(), 2.5);
        assert!(matches!(mse(&[1.0], &[1.0, 2.0]), Err(AnalysisError::LengthMismatch { .. })));
    }

    #[test]
    fn observed_tail_goes_to_last() {
        assert_eq!(observed_counts(&[0.0, 1.0, 7.0, 3.0], 3), vec![1.0, 1.0, 2.0]);
    }

    proptest! {
        #[test]
        fn p_value_in_unit_interval(
            exp in prop::collection::vec(0.01f64..40.0, 2..15),
            obs in prop::collection::vec(0u32..40, 15),
        ) {
            let obs: Vec<f64> = obs[..exp.len()].iter().map(|&o| o as f64 + 1.0).collect();
            if let Ok(r) = chi_square_gof(&exp, &obs) {
                prop_assert!((0.0..=1.0).contains(&r.p_value));
                prop_assert!(r.df < exp.len());
                prop_assert!(r.bins.iter().all(|b| b.expected >= 5.0));
            }
        }
    }
}
