//! Small statistical helpers for checking Monte Carlo output.

use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Kolmogorov–Smirnov distance between a sample and a continuous CDF.
pub fn ks_distance(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

/// CDF of `m / χ²_ν`.
pub fn scaled_inverse_chi_squared_cdf(m: f64, dof: f64) -> impl Fn(f64) -> f64 {
    let chi = ChiSquared::new(dof).expect("positive degrees of freedom");
    move |x| if x <= 0.0 { 0.0 } else { chi.sf(m / x) }
}

/// `√(p(1−p)/trials)`.
pub fn binomial_se(p: f64, trials: usize) -> f64 {
    (p * (1.0 - p) / trials as f64).sqrt()
}

/// Weighted least-squares non-decreasing fit (pool adjacent violators).
pub fn isotonic_increasing(values: &[f64], weights: &[f64]) -> Vec<f64> {
    assert_eq!(values.len(), weights.len());
    // Each block: (weighted mean, total weight, count).
    let mut blocks: Vec<(f64, f64, usize)> = Vec::with_capacity(values.len());
    for (&v, &w) in values.iter().zip(weights) {
        blocks.push((v, w, 1));
        while blocks.len() > 1 && blocks[blocks.len() - 2].0 > blocks[blocks.len() - 1].0 {
            let (v2, w2, c2) = blocks.pop().unwrap();
            let (v1, w1, c1) = blocks.pop().unwrap();
            let w = w1 + w2;
            blocks.push(((v1 * w1 + v2 * w2) / w, w, c1 + c2));
        }
    }
    blocks
        .into_iter()
        .flat_map(|(v, _, c)| std::iter::repeat_n(v, c))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonotonicityCheck {
    pub fitted: Vec<f64>,
    /// `Σ (p̂ᵢ − fitᵢ)² / varᵢ` with the binomial variance at the fitted rate.
    pub statistic: f64,
    pub critical: f64,
    pub consistent: bool,
}

/// Tests whether success rates ordered by `m` are non-decreasing up to
/// binomial noise, at significance `alpha`.
///
/// The isotonic residual statistic is compared against the `1 − alpha`
/// quantile of `χ²` with one degree of freedom per cell, which dominates its
/// null distribution.
pub fn monotone_within_noise(rates: &[f64], trials: &[usize], alpha: f64) -> MonotonicityCheck {
    let weights: Vec<f64> = trials.iter().map(|&t| t as f64).collect();
    let fitted = isotonic_increasing(rates, &weights);
    let statistic = rates
        .iter()
        .zip(&fitted)
        .zip(trials)
        .map(|((&p, &f), &t)| {
            // Floor the variance at half a success so saturated cells still count.
            let var = (f * (1.0 - f)).max(0.5 / t as f64 * (1.0 - 0.5 / t as f64)) / t as f64;
            (p - f).powi(2) / var
        })
        .sum();
    let critical = ChiSquared::new(rates.len().max(1) as f64)
        .expect("positive degrees of freedom")
        .inverse_cdf(1.0 - alpha);
    MonotonicityCheck {
        fitted,
        statistic,
        critical,
        consistent: statistic <= critical,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn ks_against_uniform() {
        let uniform = |x: f64| x.clamp(0.0, 1.0);
        assert_relative_eq!(ks_distance(&[0.5], uniform), 0.5);
        let grid: Vec<f64> = (0..100).map(|i| (i as f64 + 0.5) / 100.0).collect();
        assert_relative_eq!(ks_distance(&grid, uniform), 0.005, max_relative = 1e-12);
        assert_relative_eq!(ks_distance(&[2.0, 3.0], uniform), 1.0);
    }

    #[test]
    fn inverse_chi_squared_cdf_median() {
        let cdf = scaled_inverse_chi_squared_cdf(100.0, 91.0);
        let median = ChiSquared::new(91.0).unwrap().inverse_cdf(0.5);
        assert_relative_eq!(cdf(100.0 / median), 0.5, max_relative = 1e-9);
        assert_eq!(cdf(-1.0), 0.0);
    }

    #[test]
    fn pava_examples() {
        let w = [1.0; 4];
        assert_eq!(
            isotonic_increasing(&[1.0, 2.0, 3.0, 4.0], &w),
            vec![1.0, 2.0, 3.0, 4.0]
        );
        assert_eq!(
            isotonic_increasing(&[3.0, 1.0, 2.0, 4.0], &w),
            vec![2.0, 2.0, 2.0, 4.0]
        );
        assert_eq!(
            isotonic_increasing(&[1.0, 3.0, 2.0], &[1.0, 1.0, 3.0]),
            vec![1.0, 2.25, 2.25]
        );
    }

    #[test]
    fn monotonicity_examples() {
        let trials = [200; 5];
        let good = monotone_within_noise(&[0.0, 0.1, 0.55, 0.9, 1.0], &trials, 0.001);
        assert!(good.consistent);
        assert_eq!(good.statistic, 0.0);
        let noisy = monotone_within_noise(&[0.0, 0.12, 0.10, 0.9, 1.0], &trials, 0.001);
        assert!(noisy.consistent);
        let bad = monotone_within_noise(&[0.0, 0.9, 0.1, 0.9, 1.0], &trials, 0.001);
        assert!(!bad.consistent);
    }

    #[test]
    fn binomial_se_example() {
        assert_relative_eq!(binomial_se(0.76, 400), (0.76f64 * 0.24 / 400.0).sqrt());
        assert_eq!(binomial_se(1.0, 10), 0.0);
    }
}
