//! Estimators over simulated batches.

use serde::{Deserialize, Serialize};

use crate::ensemble::SampleBatch;
use crate::{Error, EstimateMethod, MomentEstimate, Result};

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (divisor `n - 1`; zero for a single value).
fn sample_sd(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

fn simulation(value: f64, stderr: f64, reps: usize) -> Result<MomentEstimate> {
    if !value.is_finite() || !stderr.is_finite() {
        return Err(Error::numeric("moment overflowed the floating-point range"));
    }
    Ok(MomentEstimate {
        value,
        stderr,
        method: EstimateMethod::Simulation,
        effort: reps as u64,
    })
}

/// Mean of `w^k` with standard error `sd / √n`.
pub fn raw_moment(xs: &[f64], k: u32) -> Result<MomentEstimate> {
    if xs.is_empty() {
        return Err(Error::domain("no samples"));
    }
    let powers: Vec<f64> = xs.iter().map(|x| x.powi(k as i32)).collect();
    simulation(
        mean(&powers),
        sample_sd(&powers) / (xs.len() as f64).sqrt(),
        xs.len(),
    )
}

/// `E[w_p^k]` over the batch.
pub fn empirical_moment(batch: &SampleBatch, p: u32, k: u32) -> Result<MomentEstimate> {
    raw_moment(&batch.column(p)?, k)
}

/// Unbiased sample covariance with the standard error of the mean of the
/// centred products.
pub fn covariance(pairs: &[(f64, f64)]) -> Result<MomentEstimate> {
    if pairs.len() < 2 {
        return Err(Error::domain(
            "covariance needs at least two paired samples",
        ));
    }
    let n = pairs.len() as f64;
    let mx = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let products: Vec<f64> = pairs.iter().map(|(x, y)| (x - mx) * (y - my)).collect();
    let value = products.iter().sum::<f64>() / (n - 1.0);
    simulation(value, sample_sd(&products) / n.sqrt(), pairs.len())
}

/// `Cov(w_{p1}, w_{p2})` over paired records of the same matrices.
pub fn empirical_mixed(batch: &SampleBatch, p1: u32, p2: u32) -> Result<MomentEstimate> {
    covariance(&batch.paired(p1, p2)?)
}

/// Central moments `(mean, m2, m3, m4)` with divisor `n`.
fn central(xs: &[f64]) -> (f64, f64, f64, f64) {
    let mu = mean(xs);
    let n = xs.len() as f64;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &x in xs {
        let d = x - mu;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    (mu, m2 / n, m3 / n, m4 / n)
}

/// Sample skewness `m3 / m2^{3/2}`; the error comes from the empirical
/// influence function.
pub fn skewness(xs: &[f64]) -> Result<MomentEstimate> {
    if xs.len() < 3 {
        return Err(Error::domain("skewness needs at least three samples"));
    }
    let (mu, m2, m3, _) = central(xs);
    if m2 <= 0.0 {
        return Err(Error::numeric("zero variance"));
    }
    let value = m3 / m2.powf(1.5);
    let influence: Vec<f64> = xs
        .iter()
        .map(|&x| {
            let d = x - mu;
            (d.powi(3) - m3 - 3.0 * m2 * d) / m2.powf(1.5) - 1.5 * value * (d * d - m2) / m2
        })
        .collect();
    simulation(
        value,
        sample_sd(&influence) / (xs.len() as f64).sqrt(),
        xs.len(),
    )
}

/// Sample excess kurtosis `m4 / m2² - 3` with influence-function error.
pub fn excess_kurtosis(xs: &[f64]) -> Result<MomentEstimate> {
    if xs.len() < 4 {
        return Err(Error::domain("kurtosis needs at least four samples"));
    }
    let (mu, m2, m3, m4) = central(xs);
    if m2 <= 0.0 {
        return Err(Error::numeric("zero variance"));
    }
    let kurt = m4 / (m2 * m2);
    let influence: Vec<f64> = xs
        .iter()
        .map(|&x| {
            let d = x - mu;
            (d.powi(4) - m4 - 4.0 * m3 * d) / (m2 * m2) - 2.0 * kurt * (d * d - m2) / m2
        })
        .collect();
    simulation(
        kurt - 3.0,
        sample_sd(&influence) / (xs.len() as f64).sqrt(),
        xs.len(),
    )
}

/// Two-sample Kolmogorov–Smirnov statistic `sup |F_a - F_b|`.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::domain("KS statistic needs two non-empty samples"));
    }
    let sorted = |xs: &[f64]| {
        let mut v = xs.to_vec();
        v.sort_by(f64::total_cmp);
        v
    };
    let (a, b) = (sorted(a), sorted(b));
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
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
    Ok(d)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub bin_left: f64,
    pub bin_right: f64,
    pub count: u64,
}

/// Equal-width bins over `[min, max]`; the maximum falls in the last bin.
pub fn histogram_of(xs: &[f64], bins: usize) -> Result<Vec<HistogramBin>> {
    if bins == 0 {
        return Err(Error::domain("bins must be >= 1"));
    }
    if xs.is_empty() {
        return Err(Error::domain("no samples"));
    }
    let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !lo.is_finite() || !hi.is_finite() {
        return Err(Error::numeric("non-finite samples"));
    }
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0u64; bins];
    for &x in xs {
        let idx = if width > 0.0 {
            (((x - lo) / width) as usize).min(bins - 1)
        } else {
            0
        };
        counts[idx] += 1;
    }
    Ok(counts
        .into_iter()
        .enumerate()
        .map(|(i, count)| HistogramBin {
            bin_left: lo + width * i as f64,
            bin_right: if i + 1 == bins {
                hi
            } else {
                lo + width * (i + 1) as f64
            },
            count,
        })
        .collect())
}

pub fn histogram(batch: &SampleBatch, p: u32, bins: usize) -> Result<Vec<HistogramBin>> {
    histogram_of(&batch.column(p)?, bins)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::{sample_batch, EntryDistribution};
    use rand::Rng;

    #[test]
    fn var_w1_is_one() {
        for n in [5usize, 40] {
            let b = sample_batch(EntryDistribution::Rademacher, n, &[1], 20_000, 11).unwrap();
            let m = empirical_moment(&b, 1, 2).unwrap();
            assert!((m.value - 1.0).abs() < 4.0 * m.stderr, "n={n}: {m:?}");
        }
    }

    #[test]
    fn missing_power_is_an_error() {
        let b = sample_batch(EntryDistribution::Gaussian, 4, &[1], 10, 0).unwrap();
        assert!(empirical_moment(&b, 3, 1).is_err());
        assert!(empirical_mixed(&b, 1, 3).is_err());
    }

    #[test]
    fn overflow_is_numeric() {
        assert!(matches!(
            raw_moment(&[1e200, 2.0], 4),
            Err(Error::Numeric(_))
        ));
    }

    #[test]
    fn covariance_of_known_pairs() {
        let pairs = [(1.0, 2.0), (2.0, 4.0), (3.0, 6.0)];
        assert!((covariance(&pairs).unwrap().value - 2.0).abs() < 1e-12);
    }

    #[test]
    fn shape_statistics_of_normal_draws() {
        let mut rng = crate::rng::substream(0, crate::rng::Domain::Adhoc, 0);
        let xs: Vec<f64> = (0..50_000)
            .map(|_| rand_distr::Distribution::<f64>::sample(&rand_distr::StandardNormal, &mut rng))
            .collect();
        let s = skewness(&xs).unwrap();
        let k = excess_kurtosis(&xs).unwrap();
        // Normal theory: se ≈ √(6/n), √(24/n).
        assert!((s.stderr - (6.0f64 / 50_000.0).sqrt()).abs() < 0.003);
        assert!((k.stderr - (24.0f64 / 50_000.0).sqrt()).abs() < 0.006);
        assert!(s.value.abs() < 4.0 * s.stderr);
        assert!(k.value.abs() < 4.0 * k.stderr);
        let exp: Vec<f64> = (0..50_000).map(|_| -rng.random::<f64>().ln()).collect();
        let e = excess_kurtosis(&exp).unwrap();
        assert!((e.value - 6.0).abs() < 5.0 * e.stderr, "{e:?}");
    }

    #[test]
    fn ks_statistic() {
        assert_eq!(
            ks_two_sample(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(),
            0.0
        );
        assert_eq!(ks_two_sample(&[1.0, 2.0], &[3.0, 4.0]).unwrap(), 1.0);
        assert!((ks_two_sample(&[1.0, 3.0], &[2.0, 4.0]).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn histogram_bins() {
        let h = histogram_of(&[0.0, 0.5, 1.0, 1.0, 2.0], 2).unwrap();
        assert_eq!(h.len(), 2);
        assert_eq!((h[0].bin_left, h[0].bin_right, h[0].count), (0.0, 1.0, 2));
        assert_eq!((h[1].bin_left, h[1].bin_right, h[1].count), (1.0, 2.0, 3));
        let flat = histogram_of(&[3.0, 3.0], 4).unwrap();
        assert_eq!(flat.iter().map(|b| b.count).sum::<u64>(), 2);
    }
}
