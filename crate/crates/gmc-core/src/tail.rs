//! Generic heavy-tail machinery, independent of GMC: Hill and fit-based tail
//! estimation, Goldie's implicit-renewal constant via the coupling identity,
//! Laplace-transform (Tauberian) coefficient estimators, and the product-tail
//! lemma — each validated on analytically solvable distributions.
//!
//! All asymptotic limits (`lambda -> 0+` or `infinity`, `t -> infinity`) are
//! realized as finite grids with explicit plateau/drift diagnostics, never as
//! claimed limits.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::function::gamma::gamma as gamma_fn;

use crate::error::GmcError;
use crate::stats::{bootstrap_se, jackknife, sorted_ascending, survival, Estimate};

/// Power-law tail estimate `P(X > t) ≈ C t^{-q}`.
#[derive(Debug, Clone)]
pub struct TailEstimate {
    pub exponent: f64,
    pub exponent_se: f64,
    /// Fitted tail constant, when the estimator produces one.
    pub coefficient: Option<f64>,
    pub coefficient_se: Option<f64>,
    pub n: usize,
    /// Order-statistic count (Hill) or lower fit threshold (fits).
    pub threshold: f64,
}

/// Hill estimator of the tail index from the top `k` order statistics:
/// `q̂ = k / sum_{i=1}^{k} log(X_(n-i+1) / X_(n-k))`, `SE = q̂ / sqrt(k)`.
pub fn hill_estimator(samples: &[f64], k: usize) -> Result<TailEstimate, GmcError> {
    let n = samples.len();
    if k < 10 {
        return Err(GmcError::InsufficientData {
            what: "hill order statistics",
            need: 10,
            have: k,
        });
    }
    if k >= n {
        return Err(GmcError::InsufficientData {
            what: "hill sample",
            need: k + 1,
            have: n,
        });
    }
    if samples.iter().any(|&x| !(x > 0.0)) {
        return Err(GmcError::invalid("samples", "hill estimator needs positive samples"));
    }
    let sorted = sorted_ascending(samples);
    let x_k = sorted[n - 1 - k];
    let sum_log: f64 = sorted[n - k..].iter().map(|&x| (x / x_k).ln()).sum();
    if sum_log <= 0.0 {
        return Err(GmcError::Degenerate("hill estimator (tied order statistics)"));
    }
    let q_hat = k as f64 / sum_log;
    Ok(TailEstimate {
        exponent: q_hat,
        exponent_se: q_hat / (k as f64).sqrt(),
        coefficient: None,
        coefficient_se: None,
        n,
        threshold: k as f64,
    })
}

/// Hill estimates across a ladder of `k` values (a "Hill plot"); light-tailed
/// input shows no stable plateau.
pub fn hill_plot(samples: &[f64], ks: &[usize]) -> Result<Vec<(usize, f64)>, GmcError> {
    ks.iter()
        .map(|&k| hill_estimator(samples, k).map(|e| (k, e.exponent)))
        .collect()
}

/// Direct fit of `C` in `P(X > t) ≈ C t^{-q}` at known exponent: the mean
/// level of `t^q P̂(X > t)` over a log grid of thresholds in `fit_range`,
/// with a drift diagnostic (relative change across the range).
#[derive(Debug, Clone)]
pub struct CoefficientFit {
    pub coefficient: Estimate,
    /// Relative drift of the compensated level from the lower to the upper
    /// third of the fit range; large values flag a non-power-law fit.
    pub drift: f64,
}

pub fn tail_coefficient_fit(
    samples: &[f64],
    q: f64,
    fit_range: (f64, f64),
) -> Result<CoefficientFit, GmcError> {
    if !(q > 0.0) {
        return Err(GmcError::invalid("q", "tail exponent must be positive"));
    }
    let (lo, hi) = fit_range;
    if !(lo > 0.0 && hi > lo) {
        return Err(GmcError::invalid("fit_range", "need 0 < lo < hi"));
    }
    let sorted = sorted_ascending(samples);
    let n = sorted.len();
    let exceed_hi = (survival(&sorted, hi) * n as f64).round() as usize;
    if exceed_hi < 50 {
        return Err(GmcError::InsufficientData {
            what: "tail exceedances in fit range",
            need: 50,
            have: exceed_hi,
        });
    }
    let ts = crate::stats::log_grid(lo, hi, 25);
    let level = |s: &[f64]| -> f64 {
        let sorted = sorted_ascending(s);
        ts.iter().map(|&t| t.powf(q) * survival(&sorted, t)).sum::<f64>() / ts.len() as f64
    };
    let boot = bootstrap_se(samples, 40, 0x7461_696c, level)?;
    let levels: Vec<f64> = ts.iter().map(|&t| t.powf(q) * survival(&sorted, t)).collect();
    let third = levels.len() / 3;
    let low = levels[..third].iter().sum::<f64>() / third as f64;
    let high = levels[levels.len() - third..].iter().sum::<f64>() / third as f64;
    let drift = (high - low) / boot.value.abs().max(f64::MIN_POSITIVE);
    Ok(CoefficientFit {
        coefficient: boot,
        drift,
    })
}

/// Paired samples `(U, V)` with `V =_d M·U` structure, multiplier samples,
/// and the moment index `q` at which `E[M^q] = 1`.
#[derive(Debug, Clone)]
pub struct GoldieProblem {
    pub u_samples: Vec<f64>,
    pub v_samples: Vec<f64>,
    pub m_samples: Vec<f64>,
    pub q: f64,
}

impl GoldieProblem {
    pub fn validate(&self) -> Result<(), GmcError> {
        if self.u_samples.len() != self.v_samples.len() {
            return Err(GmcError::invalid("U/V", "paired samples must have equal length"));
        }
        if !(self.q > 0.0) {
            return Err(GmcError::invalid("q", "moment index must be positive"));
        }
        if self
            .u_samples
            .iter()
            .chain(&self.v_samples)
            .chain(&self.m_samples)
            .any(|&x| x < 0.0)
        {
            return Err(GmcError::invalid("samples", "must be nonnegative"));
        }
        Ok(())
    }
}

/// Output of [`goldie_constant`]: the implicit-renewal tail constant
/// `C = E[U^q - V^q] / (q E[M^q log M])` with the multiplier moment checks.
#[derive(Debug, Clone)]
pub struct GoldieEstimate {
    pub constant: Estimate,
    pub m_q: Estimate,
    pub m_q_log_m: Estimate,
}

pub fn goldie_constant(problem: &GoldieProblem) -> Result<GoldieEstimate, GmcError> {
    problem.validate()?;
    let q = problem.q;
    let diffs: Vec<f64> = problem
        .u_samples
        .iter()
        .zip(&problem.v_samples)
        .map(|(&u, &v)| u.powf(q) - v.powf(q))
        .collect();
    let num = jackknife(&[&diffs], |m| m[0])?;
    let mq: Vec<f64> = problem.m_samples.iter().map(|&m| m.powf(q)).collect();
    let mql: Vec<f64> = problem.m_samples.iter().map(|&m| m.powf(q) * m.ln()).collect();
    let m_q = jackknife(&[&mq], |m| m[0])?;
    let m_q_log_m = jackknife(&[&mql], |m| m[0])?;
    if m_q_log_m.value <= 0.0 {
        return Err(GmcError::RenewalHypothesis(format!(
            "E[M^q log M] = {:.4e} must be positive",
            m_q_log_m.value
        )));
    }
    let value = num.value / (q * m_q_log_m.value);
    // numerator and denominator come from independent streams; combine
    // relative variances
    let rel = ((num.se / num.value).powi(2) + (m_q_log_m.se / m_q_log_m.value).powi(2)).sqrt();
    Ok(GoldieEstimate {
        constant: Estimate {
            value,
            se: value.abs() * rel,
            n: diffs.len(),
        },
        m_q,
        m_q_log_m,
    })
}

/// Diagnostics for Goldie's hypotheses on the multiplier: `E[M^q]` (target 1),
/// `E[M^q log M]` (must be positive and finite), and a heuristic
/// non-arithmeticity screen on `log M`.
#[derive(Debug, Clone)]
pub struct GoldieConditionReport {
    pub m_q: Estimate,
    pub m_q_log_m: Estimate,
    /// Raised when `log M` concentrates on very few distinct values — the
    /// lattice case excluded by the theorem. Finite samples can only screen
    /// for this, not certify it.
    pub arithmetic_suspect: bool,
}

pub fn goldie_condition_report(m_samples: &[f64], q: f64) -> Result<GoldieConditionReport, GmcError> {
    if m_samples.iter().any(|&x| !(x > 0.0)) {
        return Err(GmcError::invalid("M samples", "must be strictly positive"));
    }
    let mq: Vec<f64> = m_samples.iter().map(|&m| m.powf(q)).collect();
    let mql: Vec<f64> = m_samples.iter().map(|&m| m.powf(q) * m.ln()).collect();
    let mut logs: Vec<f64> = m_samples.iter().map(|&m| m.ln()).collect();
    logs.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
    let mut distinct = 1usize;
    for w in logs.windows(2) {
        if (w[1] - w[0]).abs() > 1e-9 * (1.0 + w[1].abs()) {
            distinct += 1;
        }
    }
    let arithmetic_suspect = distinct <= (m_samples.len() / 10).clamp(1, 64);
    Ok(GoldieConditionReport {
        m_q: jackknife(&[&mq], |m| m[0])?,
        m_q_log_m: jackknife(&[&mql], |m| m[0])?,
        arithmetic_suspect,
    })
}

/// A compensated Laplace curve with its plateau diagnostics.
#[derive(Debug, Clone)]
pub struct PlateauReport {
    pub lambdas: Vec<f64>,
    pub curve: Vec<f64>,
    /// Per-point Monte Carlo standard errors of the compensated curve.
    pub point_se: Vec<f64>,
    /// Mean level over the final decade of the grid.
    pub level: Estimate,
    /// `(max - min) / min` over the final decade.
    pub drift: f64,
    /// Whether the final-decade variation is below 20%.
    pub flat: bool,
}

/// Shared plateau computation: the "final decade" is the subset of the grid
/// within a factor 10 of the asymptotic end (`largest` lambdas when the limit
/// is at infinity, `smallest` when at zero).
fn plateau(lambdas: &[f64], curve: Vec<f64>, point_se: Vec<f64>, end_at_infinity: bool) -> PlateauReport {
    let (lo, hi) = if end_at_infinity {
        let max = lambdas.iter().cloned().fold(f64::MIN, f64::max);
        (max / 10.0, max)
    } else {
        let min = lambdas.iter().cloned().fold(f64::MAX, f64::min);
        (min, min * 10.0)
    };
    let idx: Vec<usize> = lambdas
        .iter()
        .enumerate()
        .filter(|(_, &l)| l >= lo && l <= hi)
        .map(|(i, _)| i)
        .collect();
    let vals: Vec<f64> = idx.iter().map(|&i| curve[i]).collect();
    let level_val = vals.iter().sum::<f64>() / vals.len() as f64;
    // conservative SE for the plateau level: the largest per-point MC error
    // in the decade (points share samples, so averaging does not reduce it)
    let level_se = idx.iter().map(|&i| point_se[i]).fold(0.0f64, f64::max);
    let max = vals.iter().cloned().fold(f64::MIN, f64::max);
    let min = vals.iter().cloned().fold(f64::MAX, f64::min);
    let drift = if min > 0.0 { (max - min) / min } else { f64::INFINITY };
    PlateauReport {
        lambdas: lambdas.to_vec(),
        curve,
        point_se,
        level: Estimate {
            value: level_val,
            se: level_se,
            n: vals.len(),
        },
        drift,
        flat: drift < 0.2,
    }
}

fn check_grid(lambda_grid: &[f64]) -> Result<(), GmcError> {
    if lambda_grid.len() < 4 || lambda_grid.iter().any(|&l| !(l > 0.0)) {
        return Err(GmcError::invalid("lambda_grid", "need >= 4 positive points"));
    }
    let max = lambda_grid.iter().cloned().fold(f64::MIN, f64::max);
    let min = lambda_grid.iter().cloned().fold(f64::MAX, f64::min);
    if max / min < 100.0 {
        return Err(GmcError::invalid("lambda_grid", "must span at least 2 decades"));
    }
    Ok(())
}

/// Mean and SE of `f(u)` over the sample, for each lambda.
fn curve_with_se<F>(samples: &[f64], lambdas: &[f64], f: F) -> (Vec<f64>, Vec<f64>)
where
    F: Fn(f64, f64) -> f64,
{
    let n = samples.len() as f64;
    let mut curve = Vec::with_capacity(lambdas.len());
    let mut ses = Vec::with_capacity(lambdas.len());
    for &lam in lambdas {
        let mut acc = 0.0;
        let mut acc2 = 0.0;
        for &u in samples {
            let v = f(lam, u);
            acc += v;
            acc2 += v * v;
        }
        let mean = acc / n;
        let var = (acc2 / n - mean * mean).max(0.0);
        curve.push(mean);
        ses.push((var / n).sqrt());
    }
    (curve, ses)
}

/// Tauberian Laplace coefficient (`lambda -> infinity` end):
/// `E[e^{-lambda/U}] ~ C Gamma(1+p) / lambda^p` for `P(U > t) ~ C t^{-p}`.
/// Returns the compensated curve `lambda^p E[e^{-lambda/U}] / Gamma(1+p)`,
/// whose plateau estimates `C`.
pub fn laplace_tail_coefficient(
    samples: &[f64],
    p: f64,
    lambda_grid: &[f64],
) -> Result<PlateauReport, GmcError> {
    check_grid(lambda_grid)?;
    if !(p > 0.0) {
        return Err(GmcError::invalid("p", "must be positive"));
    }
    let gp = gamma_fn(1.0 + p);
    let (mut curve, mut ses) = curve_with_se(samples, lambda_grid, |lam, u| (-lam / u).exp());
    for (i, &lam) in lambda_grid.iter().enumerate() {
        let comp = lam.powf(p) / gp;
        curve[i] *= comp;
        ses[i] *= comp;
    }
    Ok(plateau(lambda_grid, curve, ses, true))
}

/// Marginal-moment Tauberian estimate (`lambda -> 0+` end):
/// `E[U^q e^{-lambda U}] ~ C q (-log lambda)`, so the compensated curve
/// `E[U^q e^{-lambda U}] / (-log lambda)` plateaus at `C q`.
/// Convergence is logarithmic; the report warns implicitly through `drift`.
pub fn log_laplace_coefficient(
    samples: &[f64],
    q: f64,
    lambda_grid: &[f64],
) -> Result<PlateauReport, GmcError> {
    check_grid(lambda_grid)?;
    if lambda_grid.iter().any(|&l| l >= 1.0) {
        return Err(GmcError::invalid("lambda_grid", "log-Laplace grid must lie in (0, 1)"));
    }
    let (mut curve, mut ses) = curve_with_se(samples, lambda_grid, |lam, u| u.powf(q) * (-lam * u).exp());
    for (i, &lam) in lambda_grid.iter().enumerate() {
        let comp = 1.0 / (-lam.ln());
        curve[i] *= comp;
        ses[i] *= comp;
    }
    Ok(plateau(lambda_grid, curve, ses, false))
}

/// Slope variant of [`log_laplace_coefficient`]: OLS slope of
/// `E[U^q e^{-lambda U}]` against `-log lambda`, which removes the O(1)
/// intercept that the plain ratio only suppresses logarithmically.
/// Returns an estimate of `C q` with a bootstrap SE.
pub fn log_laplace_slope(samples: &[f64], q: f64, lambda_grid: &[f64]) -> Result<Estimate, GmcError> {
    check_grid(lambda_grid)?;
    if lambda_grid.iter().any(|&l| l >= 1.0) {
        return Err(GmcError::invalid("lambda_grid", "log-Laplace grid must lie in (0, 1)"));
    }
    let xs: Vec<f64> = lambda_grid.iter().map(|&l| -l.ln()).collect();
    let slope_of = |s: &[f64]| -> f64 {
        let n = s.len() as f64;
        let ys: Vec<f64> = lambda_grid
            .iter()
            .map(|&lam| s.iter().map(|&u| u.powf(q) * (-lam * u).exp()).sum::<f64>() / n)
            .collect();
        ols_slope(&xs, &ys)
    };
    bootstrap_se(samples, 30, 0x736c_6f70, slope_of)
}

fn ols_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(&x, &y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|&x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Joint Laplace estimate (`lambda -> infinity` end):
/// `E[U^{-p} e^{-lambda/U}] ~ (q/(p+q)) C Gamma(p+q+1) / lambda^{p+q}`.
/// Returns the compensated curve `lambda^{p+q} E[U^{-p} e^{-lambda/U}]` with
/// plateau, and the reference value when `C` is supplied.
#[derive(Debug, Clone)]
pub struct LapCoReport {
    pub plateau: PlateauReport,
    pub reference: Option<f64>,
}

pub fn lap_co_asymptote(
    samples: &[f64],
    p: f64,
    q: f64,
    lambda_grid: &[f64],
    c: Option<f64>,
) -> Result<LapCoReport, GmcError> {
    check_grid(lambda_grid)?;
    if !(p >= 0.0 && q > 0.0) {
        return Err(GmcError::invalid("p/q", "need p >= 0, q > 0"));
    }
    let (mut curve, mut ses) =
        curve_with_se(samples, lambda_grid, |lam, u| u.powf(-p) * (-lam / u).exp());
    for (i, &lam) in lambda_grid.iter().enumerate() {
        let comp = lam.powf(p + q);
        curve[i] *= comp;
        ses[i] *= comp;
    }
    Ok(LapCoReport {
        plateau: plateau(lambda_grid, curve, ses, true),
        reference: c.map(|c| q / (p + q) * c * gamma_fn(p + q + 1.0)),
    })
}

/// Product-tail constant (heavy U, light independent V):
/// `P(UV > t) ~ C E[V^q] t^{-q}`. Fits the product tail directly and also
/// returns the factorized reference `Ĉ_U · Ê[V^q]`.
#[derive(Debug, Clone)]
pub struct ProductTailReport {
    pub fitted: CoefficientFit,
    pub reference: Estimate,
}

pub fn product_tail_constant(
    u_samples: &[f64],
    v_samples: &[f64],
    q: f64,
    u_fit_range: (f64, f64),
) -> Result<ProductTailReport, GmcError> {
    // light-tail screen on V: a stable Hill plateau on V at an exponent
    // comparable to q means the product tail is not governed by U alone
    let positive_v: Vec<f64> = v_samples.iter().cloned().filter(|&v| v > 0.0).collect();
    if positive_v.len() >= 1000 {
        if let Ok(e) = hill_estimator(&positive_v, positive_v.len() / 100) {
            if e.exponent < 2.0 * q {
                return Err(GmcError::invalid(
                    "V",
                    format!("fails the light-tail screen (Hill exponent {:.2})", e.exponent),
                ));
            }
        }
        // degenerate Hill (e.g. constant V) is itself a light-tail certificate
    }
    let n = u_samples.len().min(v_samples.len());
    let products: Vec<f64> = (0..n).map(|i| u_samples[i] * v_samples[i]).collect();
    let vq: Vec<f64> = v_samples.iter().map(|&v| v.powf(q)).collect();
    let e_vq = jackknife(&[&vq], |m| m[0])?;
    let u_fit = tail_coefficient_fit(u_samples, q, u_fit_range)?;
    // scale the fit window by a typical V to keep comparable exceedance counts
    let scale = e_vq.value.powf(1.0 / q);
    let fitted = tail_coefficient_fit(&products, q, (u_fit_range.0 * scale, u_fit_range.1 * scale))?;
    let reference_value = u_fit.coefficient.value * e_vq.value;
    let rel = ((u_fit.coefficient.se / u_fit.coefficient.value).powi(2)
        + (e_vq.se / e_vq.value).powi(2))
    .sqrt();
    Ok(ProductTailReport {
        fitted,
        reference: Estimate {
            value: reference_value,
            se: reference_value.abs() * rel,
            n,
        },
    })
}

/// Exact Pareto sampling by inverse CDF: `P(X > t) = C t^{-q}` for
/// `t >= C^{1/q}`, i.e. `X = (C/u)^{1/q}` with uniform `u`.
pub fn pareto_samples(c: f64, q: f64, n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let u: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
            (c / u).powf(1.0 / q)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::log_grid;
    use approx::assert_relative_eq;

    #[test]
    fn hill_on_exact_pareto() {
        let xs = pareto_samples(1.0, 2.0, 100_000, 1);
        let e = hill_estimator(&xs, 1000).unwrap();
        assert!((e.exponent - 2.0).abs() < 0.2, "{}", e.exponent);
        assert_relative_eq!(e.exponent_se, e.exponent / 1000f64.sqrt());
    }

    #[test]
    fn hill_rejects_degenerate() {
        let xs = vec![2.0; 1000];
        assert!(matches!(hill_estimator(&xs, 100), Err(GmcError::Degenerate(_))));
        assert!(hill_estimator(&xs, 5).is_err());
    }

    #[test]
    fn hill_plot_flags_light_tails() {
        // exponential tails: the Hill estimate keeps growing as k shrinks
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let xs: Vec<f64> = (0..100_000)
            .map(|_| -(rng.gen_range(f64::MIN_POSITIVE..1.0f64)).ln())
            .collect();
        let plot = hill_plot(&xs, &[10_000, 1000, 100]).unwrap();
        assert!(plot[2].1 > plot[1].1 && plot[1].1 > plot[0].1, "{plot:?}");
    }

    #[test]
    fn coefficient_fit_on_pareto() {
        let xs = pareto_samples(1.0, 2.0, 100_000, 5);
        let fit = tail_coefficient_fit(&xs, 2.0, (2.0, 20.0)).unwrap();
        assert!((fit.coefficient.value - 1.0).abs() < 0.05, "{:?}", fit.coefficient);
        let xs3 = pareto_samples(3.0, 1.0, 100_000, 6);
        let fit3 = tail_coefficient_fit(&xs3, 1.0, (10.0, 100.0)).unwrap();
        assert!((fit3.coefficient.value - 3.0).abs() < 0.15, "{:?}", fit3.coefficient);
    }

    #[test]
    fn coefficient_fit_scale_equivariance() {
        let xs = pareto_samples(1.0, 2.0, 50_000, 7);
        let scaled: Vec<f64> = xs.iter().map(|&x| 3.0 * x).collect();
        let a = tail_coefficient_fit(&xs, 2.0, (2.0, 20.0)).unwrap();
        let b = tail_coefficient_fit(&scaled, 2.0, (6.0, 60.0)).unwrap();
        // P(3X > t) = 9 C t^{-2}
        assert!(
            (b.coefficient.value / a.coefficient.value - 9.0).abs() < 0.5,
            "{} vs {}",
            b.coefficient.value,
            a.coefficient.value
        );
    }

    #[test]
    fn goldie_zero_when_u_equals_v() {
        let u: Vec<f64> = (1..=500).map(|i| i as f64 / 100.0).collect();
        let m: Vec<f64> = (0..500).map(|i| 1.0 + (i % 10) as f64 / 50.0).collect();
        let p = GoldieProblem {
            u_samples: u.clone(),
            v_samples: u,
            m_samples: m,
            q: 2.0,
        };
        let e = goldie_constant(&p).unwrap();
        assert_relative_eq!(e.constant.value, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn goldie_rejects_nonpositive_moment() {
        let u: Vec<f64> = (1..=100).map(|i| i as f64).collect();
        let v: Vec<f64> = (1..=100).map(|i| i as f64 * 0.5).collect();
        let m = vec![0.5; 100]; // E[M^q log M] < 0
        let p = GoldieProblem {
            u_samples: u,
            v_samples: v,
            m_samples: m,
            q: 2.0,
        };
        assert!(matches!(goldie_constant(&p), Err(GmcError::RenewalHypothesis(_))));
    }

    #[test]
    fn goldie_nonnegative_when_u_dominates() {
        let u = pareto_samples(1.0, 2.0, 5000, 9);
        let v: Vec<f64> = u.iter().map(|&x| 0.7 * x).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        // lognormal multiplier with E[M^2] = 1: mu = -sigma^2 (q=2, sigma=0.5)
        let m: Vec<f64> = (0..5000)
            .map(|_| {
                let z: f64 = rand_distr::Distribution::sample(&rand_distr::StandardNormal, &mut rng);
                (-0.25 + 0.5 * z).exp()
            })
            .collect();
        let e = goldie_constant(&GoldieProblem {
            u_samples: u,
            v_samples: v,
            m_samples: m,
            q: 2.0,
        })
        .unwrap();
        assert!(e.constant.value >= 0.0);
        assert!((e.m_q.value - 1.0).abs() <= 3.0 * e.m_q.se, "{:?}", e.m_q);
    }

    #[test]
    fn condition_report_flags_constant_multiplier() {
        let m = vec![1.0; 1000];
        let r = goldie_condition_report(&m, 2.0).unwrap();
        assert_relative_eq!(r.m_q.value, 1.0);
        assert_relative_eq!(r.m_q_log_m.value, 0.0);
        assert!(r.arithmetic_suspect);
    }

    #[test]
    fn condition_report_lognormal_multiplier() {
        // M lognormal(mu = -q sigma^2/2, sigma): E[M^q] = 1
        let (q, sigma) = (2.0, 1.0);
        let mu = -q * sigma * sigma / 2.0;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let m: Vec<f64> = (0..200_000)
            .map(|_| {
                let z: f64 = rand_distr::Distribution::sample(&rand_distr::StandardNormal, &mut rng);
                (mu + sigma * z).exp()
            })
            .collect();
        let r = goldie_condition_report(&m, q).unwrap();
        assert!((r.m_q.value - 1.0).abs() <= 3.0 * r.m_q.se, "{:?}", r.m_q);
        assert!(!r.arithmetic_suspect);
        // E[M^q log M] = (mu + q sigma^2) E[M^q] = 1
        assert!((r.m_q_log_m.value - 1.0).abs() <= 3.0 * r.m_q_log_m.se, "{:?}", r.m_q_log_m);
    }

    #[test]
    fn laplace_coefficient_on_pareto() {
        // keep lambda below the sample-depletion scale: e^{-lambda/U} probes
        // U ~ lambda, and the sample max is ~sqrt(C n) ~ 450 here
        let xs = pareto_samples(1.0, 2.0, 500_000, 12);
        let grid = log_grid(1.0, 120.0, 16);
        let rep = laplace_tail_coefficient(&xs, 2.0, &grid).unwrap();
        assert!(rep.flat, "drift {}", rep.drift);
        assert!((rep.level.value - 1.0).abs() < 0.05, "{:?}", rep.level);
    }

    #[test]
    fn laplace_coefficient_flags_bounded_input() {
        let xs = vec![2.0; 10_000];
        let grid = log_grid(1.0, 120.0, 16);
        let rep = laplace_tail_coefficient(&xs, 2.0, &grid).unwrap();
        assert!(!rep.flat, "constant U has no power-law plateau");
    }

    #[test]
    fn log_laplace_on_pareto() {
        // lambda must stay above ~1/max(U) or the empirical moment stops
        // tracking -log lambda; convergence is logarithmic (the O(1) part is
        // suppressed only like 1/log lambda), hence the loose tolerance
        let xs = pareto_samples(1.0, 2.0, 200_000, 13);
        let grid = log_grid(2e-3, 0.5, 16);
        let rep = log_laplace_coefficient(&xs, 2.0, &grid).unwrap();
        assert!((rep.level.value - 2.0).abs() < 0.35, "{:?}", rep.level);
        let xs2 = pareto_samples(2.0, 2.0, 200_000, 13);
        let rep2 = log_laplace_coefficient(&xs2, 2.0, &grid).unwrap();
        assert!((rep2.level.value / rep.level.value - 2.0).abs() < 0.2);
    }

    #[test]
    fn log_laplace_bounded_input_vanishes() {
        let xs = vec![1.5; 10_000];
        let grid = log_grid(1e-12, 1e-3, 16);
        let rep = log_laplace_coefficient(&xs, 2.0, &grid).unwrap();
        assert!(rep.level.value < 0.1, "{:?}", rep.level);
    }

    #[test]
    fn lap_co_on_pareto() {
        let xs = pareto_samples(1.0, 2.0, 200_000, 14);
        let grid = log_grid(1.0, 120.0, 16);
        let rep = lap_co_asymptote(&xs, 1.0, 2.0, &grid, Some(1.0)).unwrap();
        // (q/(p+q)) C Gamma(p+q+1) = (2/3) Gamma(4) = 4
        assert_relative_eq!(rep.reference.unwrap(), 4.0, epsilon = 1e-12);
        assert!((rep.plateau.level.value - 4.0).abs() < 0.3, "{:?}", rep.plateau.level);
        // p = 0 reduces to laplace_tail_coefficient * Gamma(1+q)
        let rep0 = lap_co_asymptote(&xs, 0.0, 2.0, &grid, Some(1.0)).unwrap();
        let base = laplace_tail_coefficient(&xs, 2.0, &grid).unwrap();
        assert_relative_eq!(
            rep0.plateau.level.value,
            base.level.value * gamma_fn(3.0),
            max_relative = 1e-10
        );
    }

    #[test]
    fn product_tail_with_constant_v() {
        let u = pareto_samples(1.0, 2.0, 100_000, 15);
        let v = vec![2.0; 100_000];
        let rep = product_tail_constant(&u, &v, 2.0, (2.0, 20.0)).unwrap();
        // C E[V^2] = 4
        assert!((rep.reference.value - 4.0).abs() < 0.2, "{:?}", rep.reference);
        assert!((rep.fitted.coefficient.value - 4.0).abs() < 0.3, "{:?}", rep.fitted.coefficient);
    }

    #[test]
    fn product_tail_rejects_heavy_v() {
        let u = pareto_samples(1.0, 2.0, 50_000, 16);
        let v = pareto_samples(1.0, 2.0, 50_000, 17);
        assert!(product_tail_constant(&u, &v, 2.0, (2.0, 20.0)).is_err());
    }

    #[test]
    fn coupling_identity_cross_check() {
        // (1/q) E[U^q - V^q] equals the integral of (P(U>t) - P(V>t)) t^{q-1}
        let u = pareto_samples(1.0, 3.0, 50_000, 18);
        let v: Vec<f64> = u.iter().map(|&x| 0.8 * x).collect();
        let q = 2.0; // below the tail index so moments are finite
        let lhs: f64 = u
            .iter()
            .zip(&v)
            .map(|(&a, &b)| (a.powf(q) - b.powf(q)) / q)
            .sum::<f64>()
            / u.len() as f64;
        let su = sorted_ascending(&u);
        let sv = sorted_ascending(&v);
        let tmax = su[su.len() - 1];
        let steps = 4000;
        let mut rhs = 0.0;
        for i in 0..steps {
            let t = tmax * (i as f64 + 0.5) / steps as f64;
            rhs += (survival(&su, t) - survival(&sv, t)) * t.powf(q - 1.0) * (tmax / steps as f64);
        }
        assert!((lhs - rhs).abs() < 0.05 * lhs.abs().max(0.1), "{lhs} vs {rhs}");
    }
}
