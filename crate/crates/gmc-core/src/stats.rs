//! Small statistical utilities shared by the estimator modules: means with
//! standard errors, delete-one jackknife, a seeded nonparametric bootstrap,
//! and sorting helpers.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::GmcError;

/// A point estimate together with its standard error and sample size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub se: f64,
    pub n: usize,
}

impl Estimate {
    /// Whether `self` and `other` agree within `k` combined standard errors.
    pub fn agrees_within(&self, other: &Estimate, k: f64) -> bool {
        let combined = (self.se * self.se + other.se * other.se).sqrt();
        (self.value - other.value).abs() <= k * combined
    }
}

/// Sample mean with the usual `sd/sqrt(n)` standard error (which coincides
/// with the delete-one jackknife SE for the mean).
pub fn mean_with_se(xs: &[f64]) -> Result<Estimate, GmcError> {
    if xs.is_empty() {
        return Err(GmcError::InsufficientData {
            what: "mean",
            need: 1,
            have: 0,
        });
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0).max(1.0);
    Ok(Estimate {
        value: mean,
        se: (var / n).sqrt(),
        n: xs.len(),
    })
}

/// Delete-one jackknife for a statistic of the form `g(mean(f1), ..., mean(fk))`
/// where the per-sample terms are precomputed columns.
///
/// `columns` holds k slices of equal length n; `g` maps the k column means to
/// the statistic. Returns the plug-in estimate with jackknife SE. This covers
/// ratio statistics (e.g. Goldie's constant) without materializing n
/// recomputations from scratch: delete-one column means are O(1) updates.
pub fn jackknife<G>(columns: &[&[f64]], g: G) -> Result<Estimate, GmcError>
where
    G: Fn(&[f64]) -> f64,
{
    let n = columns.first().map_or(0, |c| c.len());
    if n < 2 || columns.iter().any(|c| c.len() != n) {
        return Err(GmcError::InsufficientData {
            what: "jackknife",
            need: 2,
            have: n,
        });
    }
    let sums: Vec<f64> = columns.iter().map(|c| c.iter().sum::<f64>()).collect();
    let full_means: Vec<f64> = sums.iter().map(|s| s / n as f64).collect();
    let theta = g(&full_means);

    let mut loo = vec![0.0; columns.len()];
    let mut jack_mean = 0.0;
    let mut jack_sq = 0.0;
    for i in 0..n {
        for (j, c) in columns.iter().enumerate() {
            loo[j] = (sums[j] - c[i]) / (n as f64 - 1.0);
        }
        let t = g(&loo);
        jack_mean += t;
        jack_sq += t * t;
    }
    jack_mean /= n as f64;
    jack_sq /= n as f64;
    let var = (n as f64 - 1.0) * (jack_sq - jack_mean * jack_mean).max(0.0);
    Ok(Estimate {
        value: theta,
        se: var.sqrt(),
        n,
    })
}

/// Nonparametric bootstrap SE of an arbitrary statistic of one sample.
///
/// Deterministic for fixed `(seed, n_resamples)`. Used where delete-one
/// jackknife is awkward (order-statistic based fits).
pub fn bootstrap_se<S>(xs: &[f64], n_resamples: usize, seed: u64, stat: S) -> Result<Estimate, GmcError>
where
    S: Fn(&[f64]) -> f64,
{
    if xs.len() < 2 {
        return Err(GmcError::InsufficientData {
            what: "bootstrap",
            need: 2,
            have: xs.len(),
        });
    }
    let value = stat(xs);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x626f_6f74);
    let mut resample = vec![0.0; xs.len()];
    let mut acc = 0.0;
    let mut acc_sq = 0.0;
    for _ in 0..n_resamples {
        for r in resample.iter_mut() {
            *r = xs[rng.gen_range(0..xs.len())];
        }
        let t = stat(&resample);
        acc += t;
        acc_sq += t * t;
    }
    let m = acc / n_resamples as f64;
    let var = (acc_sq / n_resamples as f64 - m * m).max(0.0);
    Ok(Estimate {
        value,
        se: var.sqrt(),
        n: xs.len(),
    })
}

/// Sort a copy of the samples ascending (NaNs rejected upstream).
pub fn sorted_ascending(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_unstable_by(|a, b| a.partial_cmp(b).expect("NaN in sample"));
    v
}

/// Empirical survival probability P(X > t) from an ascending-sorted sample.
pub fn survival(sorted: &[f64], t: f64) -> f64 {
    let idx = sorted.partition_point(|&x| x <= t);
    (sorted.len() - idx) as f64 / sorted.len() as f64
}

/// Log-spaced grid of `count` points from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi > lo && count >= 2);
    let (a, b) = (lo.ln(), hi.ln());
    (0..count)
        .map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn mean_se_matches_closed_form() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let e = mean_with_se(&xs).unwrap();
        assert_relative_eq!(e.value, 2.5, epsilon = 1e-12);
        // sd = sqrt(5/3), se = sd/2
        assert_relative_eq!(e.se, (5.0f64 / 3.0).sqrt() / 2.0, epsilon = 1e-12);
    }

    #[test]
    fn jackknife_of_mean_equals_classic_se() {
        let xs: Vec<f64> = (0..50).map(|i| (i as f64).sin() + 2.0).collect();
        let classic = mean_with_se(&xs).unwrap();
        let jack = jackknife(&[&xs], |m| m[0]).unwrap();
        assert_relative_eq!(jack.value, classic.value, epsilon = 1e-12);
        assert_relative_eq!(jack.se, classic.se, epsilon = 1e-10);
    }

    #[test]
    fn jackknife_ratio_runs() {
        let num: Vec<f64> = (1..=100).map(|i| i as f64).collect();
        let den: Vec<f64> = (1..=100).map(|i| 2.0 * i as f64).collect();
        let e = jackknife(&[&num, &den], |m| m[0] / m[1]).unwrap();
        assert_relative_eq!(e.value, 0.5, epsilon = 1e-12);
        // ratio is exactly constant under deletion, so SE ~ 0
        assert!(e.se < 1e-10);
    }

    #[test]
    fn survival_counts_strict_exceedances() {
        let s = [1.0, 2.0, 3.0, 4.0];
        assert_relative_eq!(survival(&s, 2.0), 0.5);
        assert_relative_eq!(survival(&s, 0.5), 1.0);
        assert_relative_eq!(survival(&s, 4.0), 0.0);
    }

    #[test]
    fn log_grid_endpoints() {
        let g = log_grid(0.1, 10.0, 5);
        assert_relative_eq!(g[0], 0.1, epsilon = 1e-12);
        assert_relative_eq!(g[4], 10.0, epsilon = 1e-12);
        assert_relative_eq!(g[2], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn bootstrap_is_deterministic() {
        let xs: Vec<f64> = (0..200).map(|i| ((i * 37 % 101) as f64) / 10.0).collect();
        let a = bootstrap_se(&xs, 40, 7, |s| s.iter().sum::<f64>() / s.len() as f64).unwrap();
        let b = bootstrap_se(&xs, 40, 7, |s| s.iter().sum::<f64>() / s.len() as f64).unwrap();
        assert_eq!(a.se, b.se);
        // bootstrap SE of the mean should be near the classic SE
        let classic = mean_with_se(&xs).unwrap();
        assert!((a.se - classic.se).abs() < 0.5 * classic.se);
    }
}
