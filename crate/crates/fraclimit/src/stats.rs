//! Sample statistics for Monte Carlo output: compensated summation, moment
//! summaries with jackknife standard errors, quantiles, and
//! Kolmogorov-Smirnov distances.

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("empty sample")]
    EmptySample,
    #[error("sample of size {n} is too small for this statistic")]
    SampleTooSmall { n: usize },
    #[error("sample contains a non-finite value")]
    NonFinite,
    #[error("samples of lengths {a} and {b} cannot be paired")]
    LengthMismatch { a: usize, b: usize },
}

/// Neumaier-compensated sum. One pass, immune to cancellation between
/// large intermediate partial sums.
pub fn csum(xs: &[f64]) -> f64 {
    let mut s = 0.0f64;
    let mut c = 0.0f64;
    for &x in xs {
        let t = s + x;
        if s.abs() >= x.abs() {
            c += (s - t) + x;
        } else {
            c += (x - t) + s;
        }
        s = t;
    }
    s + c
}

/// Trapezoid rule over equally spaced samples.
pub fn trapezoid(values: &[f64], dx: f64) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let interior = csum(&values[1..values.len() - 1]);
    dx * (0.5 * (values[0] + values[values.len() - 1]) + interior)
}

/// Standard normal cumulative distribution function.
pub fn standard_normal_cdf(x: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-x / std::f64::consts::SQRT_2)
}

/// Type-7 (linear interpolation) quantile of an already sorted slice.
fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = lo + 1;
    if hi >= n {
        return sorted[n - 1];
    }
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Moment summary of a Monte Carlo sample.
///
/// Standard errors come from the delete-one jackknife, computed in O(n) from
/// centered power sums. For a constant sample the shape statistics are
/// undefined and reported as `None` with `degenerate` set.
#[derive(Debug, Clone, Serialize)]
pub struct EmpiricalSummary {
    pub n: usize,
    pub mean: f64,
    pub variance: f64,
    pub skewness: Option<f64>,
    pub excess_kurtosis: Option<f64>,
    pub se_mean: f64,
    pub se_variance: f64,
    pub se_skewness: Option<f64>,
    pub se_kurtosis: Option<f64>,
    /// Quantiles at 5, 25, 50, 75 and 95 percent.
    pub quantiles: [f64; 5],
    /// Kolmogorov-Smirnov distance of the raw sample to the standard normal.
    pub ks_normal: f64,
    pub degenerate: bool,
}

/// Moments from centered power sums (sums of (x - shift)^k).
/// Returns (mean, variance, skewness, excess kurtosis) where variance uses
/// the n-1 denominator and the shape statistics the biased moment ratios.
fn moments_from_sums(
    n: f64,
    s1: f64,
    s2: f64,
    s3: f64,
    s4: f64,
    shift: f64,
) -> (f64, f64, f64, f64) {
    let m = s1 / n;
    let m2 = s2 / n - m * m;
    let m3 = s3 / n - 3.0 * m * (s2 / n) + 2.0 * m * m * m;
    let m4 = s4 / n - 4.0 * m * (s3 / n) + 6.0 * m * m * (s2 / n) - 3.0 * m * m * m * m;
    let var = m2 * n / (n - 1.0);
    let (skew, kurt) = if m2 > 0.0 {
        (m3 / m2.powf(1.5), m4 / (m2 * m2) - 3.0)
    } else {
        (f64::NAN, f64::NAN)
    };
    (shift + m, var, skew, kurt)
}

pub fn empirical_summary(sample: &[f64]) -> Result<EmpiricalSummary, StatsError> {
    let n = sample.len();
    if n == 0 {
        return Err(StatsError::EmptySample);
    }
    if n < 2 {
        return Err(StatsError::SampleTooSmall { n });
    }
    if sample.iter().any(|x| !x.is_finite()) {
        return Err(StatsError::NonFinite);
    }

    let shift = csum(sample) / n as f64;
    let centered: Vec<f64> = sample.iter().map(|x| x - shift).collect();
    let s1 = csum(&centered);
    let s2 = csum(&centered.iter().map(|y| y * y).collect::<Vec<_>>());
    let s3 = csum(&centered.iter().map(|y| y * y * y).collect::<Vec<_>>());
    let s4 = csum(&centered.iter().map(|y| y * y * y * y).collect::<Vec<_>>());
    let nf = n as f64;

    let (mean, variance, skewness, kurtosis) = moments_from_sums(nf, s1, s2, s3, s4, shift);
    let degenerate = variance <= 0.0;

    // Delete-one jackknife: recompute each statistic from power sums with one
    // observation removed, then aggregate the pseudo-value spread.
    let mut jk_mean = Vec::with_capacity(n);
    let mut jk_var = Vec::with_capacity(n);
    let mut jk_skew = Vec::with_capacity(n);
    let mut jk_kurt = Vec::with_capacity(n);
    if n > 2 && !degenerate {
        for y in &centered {
            let (mi, vi, si, ki) = moments_from_sums(
                nf - 1.0,
                s1 - y,
                s2 - y * y,
                s3 - y * y * y,
                s4 - y * y * y * y,
                shift,
            );
            jk_mean.push(mi);
            jk_var.push(vi);
            jk_skew.push(si);
            jk_kurt.push(ki);
        }
    }
    let jack_se = |vals: &[f64]| -> f64 {
        if vals.is_empty() || vals.iter().any(|v| !v.is_finite()) {
            return f64::NAN;
        }
        let m = csum(vals) / vals.len() as f64;
        let ss = csum(&vals.iter().map(|v| (v - m) * (v - m)).collect::<Vec<_>>());
        ((vals.len() as f64 - 1.0) / vals.len() as f64 * ss).sqrt()
    };

    let mut sorted = sample.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    let quantiles = [0.05, 0.25, 0.50, 0.75, 0.95].map(|p| quantile_sorted(&sorted, p));
    let ks_normal = ks_sorted(&sorted, standard_normal_cdf);

    Ok(EmpiricalSummary {
        n,
        mean,
        variance,
        skewness: if degenerate { None } else { Some(skewness) },
        excess_kurtosis: if degenerate { None } else { Some(kurtosis) },
        se_mean: (variance / nf).sqrt(),
        se_variance: jack_se(&jk_var),
        se_skewness: if degenerate {
            None
        } else {
            Some(jack_se(&jk_skew))
        },
        se_kurtosis: if degenerate {
            None
        } else {
            Some(jack_se(&jk_kurt))
        },
        quantiles,
        ks_normal,
        degenerate,
    })
}

/// One-sample Kolmogorov-Smirnov distance against a reference CDF.
pub fn ks_statistic<F: Fn(f64) -> f64>(sample: &[f64], cdf: F) -> Result<f64, StatsError> {
    if sample.is_empty() {
        return Err(StatsError::EmptySample);
    }
    if sample.iter().any(|x| !x.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let mut sorted = sample.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    Ok(ks_sorted(&sorted, cdf))
}

fn ks_sorted<F: Fn(f64) -> f64>(sorted: &[f64], cdf: F) -> f64 {
    let n = sorted.len() as f64;
    let mut d = 0.0f64;
    for (i, x) in sorted.iter().enumerate() {
        let f = cdf(*x);
        let lo = i as f64 / n;
        let hi = (i + 1) as f64 / n;
        d = d.max((f - lo).abs()).max((hi - f).abs());
    }
    d
}

/// Kolmogorov-Smirnov distance against the standard normal law.
pub fn ks_normal(sample: &[f64]) -> Result<f64, StatsError> {
    ks_statistic(sample, standard_normal_cdf)
}

/// Two-sample Kolmogorov-Smirnov distance.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<f64, StatsError> {
    if a.is_empty() || b.is_empty() {
        return Err(StatsError::EmptySample);
    }
    if a.iter().chain(b.iter()).any(|x| !x.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let mut sa = a.to_vec();
    let mut sb = b.to_vec();
    sa.sort_by(|x, y| x.partial_cmp(y).expect("finite values"));
    sb.sort_by(|x, y| x.partial_cmp(y).expect("finite values"));
    let (na, nb) = (sa.len() as f64, sb.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d = 0.0f64;
    while i < sa.len() && j < sb.len() {
        let x = sa[i].min(sb[j]);
        while i < sa.len() && sa[i] <= x {
            i += 1;
        }
        while j < sb.len() && sb[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d)
}

/// Critical value of the one-sample KS distance at the one percent level.
pub fn ks_critical_1pct(n: usize) -> f64 {
    1.63 / (n as f64).sqrt()
}

/// Pearson correlation of paired samples.
pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64, StatsError> {
    if a.len() != b.len() {
        return Err(StatsError::LengthMismatch {
            a: a.len(),
            b: b.len(),
        });
    }
    if a.len() < 2 {
        return Err(StatsError::SampleTooSmall { n: a.len() });
    }
    if a.iter().chain(b.iter()).any(|x| !x.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let n = a.len() as f64;
    let ma = csum(a) / n;
    let mb = csum(b) / n;
    let cov = csum(
        &a.iter()
            .zip(b)
            .map(|(x, y)| (x - ma) * (y - mb))
            .collect::<Vec<_>>(),
    );
    let va = csum(&a.iter().map(|x| (x - ma) * (x - ma)).collect::<Vec<_>>());
    let vb = csum(&b.iter().map(|y| (y - mb) * (y - mb)).collect::<Vec<_>>());
    if va <= 0.0 || vb <= 0.0 {
        return Err(StatsError::NonFinite);
    }
    Ok(cov / (va * vb).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn csum_beats_naive() {
        let xs = vec![1e16, 1.0, -1e16, 1.0];
        assert_eq!(csum(&xs), 2.0);
    }

    #[test]
    fn pearson_on_exact_lines() {
        let a: Vec<f64> = (0..50).map(|k| k as f64).collect();
        let b: Vec<f64> = a.iter().map(|x| -2.0 * x + 3.0).collect();
        assert_relative_eq!(pearson(&a, &b).unwrap(), -1.0, epsilon = 1e-12);
        assert_relative_eq!(pearson(&a, &a).unwrap(), 1.0, epsilon = 1e-12);
        assert!(pearson(&a, &b[..10]).is_err());
    }

    #[test]
    fn trapezoid_linear_exact() {
        let vals: Vec<f64> = (0..=10).map(|k| 3.0 * k as f64 * 0.1).collect();
        assert_relative_eq!(trapezoid(&vals, 0.1), 1.5, epsilon = 1e-14);
    }

    #[test]
    fn summary_on_known_sample() {
        // 0..=9: mean 4.5, sample variance 55/6.
        let xs: Vec<f64> = (0..10).map(|k| k as f64).collect();
        let s = empirical_summary(&xs).unwrap();
        assert_relative_eq!(s.mean, 4.5, epsilon = 1e-12);
        assert_relative_eq!(s.variance, 55.0 / 6.0, epsilon = 1e-12);
        assert_relative_eq!(s.skewness.unwrap(), 0.0, epsilon = 1e-12);
        assert_relative_eq!(s.quantiles[2], 4.5, epsilon = 1e-12);
        assert!(!s.degenerate);
        assert!(s.se_variance > 0.0);
    }

    #[test]
    fn summary_flags_constant_sample() {
        let xs = vec![2.0; 50];
        let s = empirical_summary(&xs).unwrap();
        assert_eq!(s.variance, 0.0);
        assert!(s.degenerate);
        assert!(s.skewness.is_none());
        assert!(s.excess_kurtosis.is_none());
    }

    #[test]
    fn summary_rejects_empty_and_tiny() {
        assert!(matches!(
            empirical_summary(&[]),
            Err(StatsError::EmptySample)
        ));
        assert!(matches!(
            empirical_summary(&[1.0]),
            Err(StatsError::SampleTooSmall { n: 1 })
        ));
    }

    #[test]
    fn ks_of_uniform_grid_against_uniform_cdf() {
        // Midpoint grid i/n - 1/(2n) has KS distance exactly 1/(2n).
        let n = 100;
        let xs: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
        let d = ks_statistic(&xs, |x| x.clamp(0.0, 1.0)).unwrap();
        assert_relative_eq!(d, 0.5 / n as f64, epsilon = 1e-12);
    }

    #[test]
    fn ks_two_sample_identical_is_zero() {
        let xs: Vec<f64> = (0..40).map(|i| i as f64).collect();
        assert_eq!(ks_two_sample(&xs, &xs).unwrap(), 0.0);
    }

    #[test]
    fn ks_two_sample_disjoint_is_one() {
        let a = vec![0.0, 1.0, 2.0];
        let b = vec![10.0, 11.0];
        assert_eq!(ks_two_sample(&a, &b).unwrap(), 1.0);
    }

    #[test]
    fn normal_cdf_reference_points() {
        assert_relative_eq!(standard_normal_cdf(0.0), 0.5, epsilon = 1e-15);
        assert_relative_eq!(
            standard_normal_cdf(1.959963984540054),
            0.975,
            epsilon = 1e-9
        );
    }
}
