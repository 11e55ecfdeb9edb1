//! Goodness-of-fit tests used by the suites.

use statrs::distribution::{ChiSquared, ContinuousCDF, DiscreteCDF, Poisson};

use crate::error::{input, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// Kolmogorov distribution tail `P(K > λ) = 2 Σ (−1)^{k−1} exp(−2k²λ²)`.
pub fn kolmogorov_tail(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let term = (-2.0 * (k * k) as f64 * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

fn ks_p(d: f64, n_eff: f64) -> f64 {
    let s = n_eff.sqrt();
    kolmogorov_tail((s + 0.12 + 0.11 / s) * d)
}

fn sorted_finite(sample: &[f64]) -> Result<Vec<f64>> {
    if sample.is_empty() {
        return input("empty sample");
    }
    if sample.iter().any(|x| x.is_nan()) {
        return input("sample contains NaN");
    }
    let mut v = sample.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// One-sample Kolmogorov–Smirnov test against a continuous CDF.
pub fn ks_test(sample: &[f64], cdf: impl Fn(f64) -> f64) -> Result<TestResult> {
    let v = sorted_finite(sample)?;
    let n = v.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in v.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i + 1) as f64 / n - f).max(f - i as f64 / n);
    }
    Ok(TestResult { statistic: d, p_value: ks_p(d, n) })
}

/// Two-sample Kolmogorov–Smirnov test. With ties (discrete data) the
/// asymptotic p-value is conservative.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<TestResult> {
    let (a, b) = (sorted_finite(a)?, sorted_finite(b)?);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(TestResult { statistic: d, p_value: ks_p(d, na * nb / (na + nb)) })
}

/// Two-sided p-value of an observed Poisson count.
pub fn poisson_total_test(observed: u64, mean: f64) -> Result<TestResult> {
    if !(mean > 0.0) {
        return input("Poisson mean must be positive");
    }
    let dist = Poisson::new(mean).map_err(|e| crate::Error::Input(e.to_string()))?;
    let lower = dist.cdf(observed);
    let upper = if observed == 0 { 1.0 } else { 1.0 - dist.cdf(observed - 1) };
    Ok(TestResult { statistic: observed as f64, p_value: (2.0 * lower.min(upper)).min(1.0) })
}

/// Tests counts against iid Poisson(`mean`): the total against
/// Poisson(N·mean) and the index of dispersion `Σ(c−c̄)²/c̄` against χ²
/// with N−1 degrees of freedom (two-sided). The reported p-value is the
/// Bonferroni combination of the two; the statistic is the dispersion ratio.
pub fn poisson_count_test(counts: &[u64], mean: f64) -> Result<TestResult> {
    if counts.len() < 2 {
        return input("need at least two counts");
    }
    let n = counts.len() as f64;
    let total: u64 = counts.iter().sum();
    let total_p = poisson_total_test(total, n * mean)?.p_value;
    let cbar = total as f64 / n;
    if cbar == 0.0 {
        return Ok(TestResult { statistic: f64::NAN, p_value: total_p });
    }
    let disp: f64 = counts.iter().map(|&c| (c as f64 - cbar).powi(2)).sum::<f64>() / cbar;
    let chi = ChiSquared::new(n - 1.0).map_err(|e| crate::Error::Input(e.to_string()))?;
    let c = chi.cdf(disp);
    let disp_p = 2.0 * c.min(1.0 - c);
    Ok(TestResult { statistic: disp / (n - 1.0), p_value: (2.0 * total_p.min(disp_p)).min(1.0) })
}

/// Pearson χ² test of observed counts against fully specified expectations.
pub fn chi_square_test(observed: &[u64], expected: &[f64]) -> Result<TestResult> {
    if observed.len() != expected.len() || observed.is_empty() {
        return input("observed and expected counts must have the same nonzero length");
    }
    if expected.iter().any(|&e| !(e > 0.0)) {
        return input("expected counts must be positive");
    }
    let stat: f64 = observed.iter().zip(expected).map(|(&o, &e)| (o as f64 - e).powi(2) / e).sum();
    let chi = ChiSquared::new(observed.len() as f64).map_err(|e| crate::Error::Input(e.to_string()))?;
    Ok(TestResult { statistic: stat, p_value: 1.0 - chi.cdf(stat) })
}

/// χ² test that two samples of small nonnegative integers share a law.
/// Categories are merged from the top until every expected cell count is
/// at least 5.
pub fn chi_square_homogeneity(a: &[u64], b: &[u64]) -> Result<TestResult> {
    if a.is_empty() || b.is_empty() {
        return input("empty sample");
    }
    let top = *a.iter().chain(b).max().unwrap() as usize;
    let mut ca = vec![0f64; top + 1];
    let mut cb = vec![0f64; top + 1];
    a.iter().for_each(|&x| ca[x as usize] += 1.0);
    b.iter().for_each(|&x| cb[x as usize] += 1.0);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let frac_a = na / (na + nb);
    let min_share = 5.0 / frac_a.min(1.0 - frac_a);
    // Merge cells from the top down while the pooled column is too thin.
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let (mut acc_a, mut acc_b) = (0.0, 0.0);
    for k in (0..=top).rev() {
        acc_a += ca[k];
        acc_b += cb[k];
        if acc_a + acc_b >= min_share {
            cells.push((acc_a, acc_b));
            acc_a = 0.0;
            acc_b = 0.0;
        }
    }
    if acc_a + acc_b > 0.0 {
        match cells.last_mut() {
            Some(c) => {
                c.0 += acc_a;
                c.1 += acc_b;
            }
            None => cells.push((acc_a, acc_b)),
        }
    }
    if cells.len() < 2 {
        return Ok(TestResult { statistic: 0.0, p_value: 1.0 });
    }
    let mut stat = 0.0;
    for &(x, y) in &cells {
        let col = x + y;
        let (ea, eb) = (col * frac_a, col * (1.0 - frac_a));
        stat += (x - ea).powi(2) / ea + (y - eb).powi(2) / eb;
    }
    let chi = ChiSquared::new((cells.len() - 1) as f64).map_err(|e| crate::Error::Input(e.to_string()))?;
    Ok(TestResult { statistic: stat, p_value: 1.0 - chi.cdf(stat) })
}

/// Sample mean and its standard error.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (m, (var / n).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{replica_seed, stream_rng};
    use rand::Rng;
    use rand_distr::{Distribution, Poisson as PoissonDist};

    #[test]
    fn kolmogorov_reference_values() {
        // Standard table values of the limiting distribution.
        assert!((kolmogorov_tail(1.3581) - 0.05).abs() < 1e-3);
        assert!((kolmogorov_tail(1.6276) - 0.01).abs() < 1e-3);
    }

    #[test]
    fn ks_is_calibrated() {
        let mut rejections = 0;
        for r in 0..100 {
            let mut rng = stream_rng(replica_seed(21, r), 0);
            let s: Vec<f64> = (0..300).map(|_| rng.random::<f64>()).collect();
            if ks_test(&s, |x| x.clamp(0.0, 1.0)).unwrap().p_value < 0.01 {
                rejections += 1;
            }
        }
        assert!(rejections <= 4, "{rejections}");
        let mut rng = stream_rng(3, 0);
        let shifted: Vec<f64> = (0..300).map(|_| 0.2 + rng.random::<f64>()).collect();
        assert!(ks_test(&shifted, |x| x.clamp(0.0, 1.0)).unwrap().p_value < 1e-6);
    }

    #[test]
    fn two_sample_ks() {
        let mut rng = stream_rng(4, 0);
        let a: Vec<f64> = (0..2000).map(|_| rng.random::<f64>()).collect();
        let b: Vec<f64> = (0..1500).map(|_| rng.random::<f64>()).collect();
        let c: Vec<f64> = (0..1500).map(|_| rng.random::<f64>().powf(1.3)).collect();
        assert!(ks_two_sample(&a, &b).unwrap().p_value > 0.01);
        assert!(ks_two_sample(&a, &c).unwrap().p_value < 1e-6);
        assert_eq!(ks_two_sample(&[1.0, 2.0], &[1.0, 2.0]).unwrap().statistic, 0.0);
    }

    #[test]
    fn poisson_tests_both_directions() {
        let mut rng = stream_rng(5, 0);
        let d = PoissonDist::new(5.0).unwrap();
        let counts: Vec<u64> = (0..1000).map(|_| d.sample(&mut rng) as u64).collect();
        assert!(poisson_count_test(&counts, 5.0).unwrap().p_value > 0.01);
        assert!(poisson_count_test(&counts, 10.0).unwrap().p_value < 1e-10);
        // Right mean, wrong dispersion.
        let flat: Vec<u64> = (0..1000).map(|i| 4 + (i % 3) as u64).collect();
        assert!(poisson_count_test(&flat, 5.0).unwrap().p_value < 1e-10);
        assert!(poisson_total_test(5, 5.0).unwrap().p_value > 0.5);
    }

    #[test]
    fn homogeneity() {
        let mut rng = stream_rng(6, 0);
        let d = PoissonDist::new(3.0).unwrap();
        let a: Vec<u64> = (0..3000).map(|_| d.sample(&mut rng) as u64).collect();
        let b: Vec<u64> = (0..2000).map(|_| d.sample(&mut rng) as u64).collect();
        let c: Vec<u64> = b.iter().map(|&x| x + (x % 2)).collect();
        assert!(chi_square_homogeneity(&a, &b).unwrap().p_value > 0.01);
        assert!(chi_square_homogeneity(&a, &c).unwrap().p_value < 1e-6);
    }

    #[test]
    fn chi_square() {
        assert!(chi_square_test(&[100, 100], &[100.0, 100.0]).unwrap().p_value > 0.99);
        assert!(chi_square_test(&[150, 50], &[100.0, 100.0]).unwrap().p_value < 1e-6);
        assert!(chi_square_test(&[1], &[0.0]).is_err());
    }
}
