//! Cross-cutting statistical checks: the two-sample Kolmogorov–Smirnov test,
//! the Kahane convex-order comparison between kernels, and the moment-boundary
//! scan against the Seiberg-type existence threshold.

use nalgebra::DMatrix;

use crate::error::GmcError;
use crate::field::{factorize, sample_fields, CovarianceMatrix, Grid, KernelSpec, PdPolicy};
use crate::measure::{gmc_weights, region_mass, seiberg_threshold, RegionMask, WeightFunction};
use crate::stats::{mean_with_se, sorted_ascending, Estimate};

/// Two-sample KS test result.
#[derive(Debug, Clone, Copy)]
pub struct KsReport {
    pub statistic: f64,
    pub p_value: f64,
    pub n_a: usize,
    pub n_b: usize,
}

/// Two-sample Kolmogorov–Smirnov test with the standard asymptotic p-value.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsReport, GmcError> {
    if a.is_empty() || b.is_empty() {
        return Err(GmcError::InsufficientData {
            what: "ks samples",
            need: 1,
            have: 0,
        });
    }
    let sa = sorted_ascending(a);
    let sb = sorted_ascending(b);
    let (na, nb) = (sa.len(), sb.len());
    let mut d: f64 = 0.0;
    let (mut i, mut j) = (0usize, 0usize);
    while i < na && j < nb {
        let x = sa[i].min(sb[j]);
        while i < na && sa[i] <= x {
            i += 1;
        }
        while j < nb && sb[j] <= x {
            j += 1;
        }
        let diff = (i as f64 / na as f64 - j as f64 / nb as f64).abs();
        if diff > d {
            d = diff;
        }
    }
    let n_eff = (na as f64 * nb as f64) / (na + nb) as f64;
    let lambda = (n_eff.sqrt() + 0.12 + 0.11 / n_eff.sqrt()) * d;
    Ok(KsReport {
        statistic: d,
        p_value: ks_sf(lambda),
        n_a: na,
        n_b: nb,
    })
}

/// Kolmogorov survival function `Q(lambda) = 2 sum (-1)^{k-1} e^{-2 k^2 lambda^2}`.
fn ks_sf(lambda: f64) -> f64 {
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=100 {
        let term = (-2.0 * (k as f64 * lambda).powi(2)).exp();
        sum += sign * term;
        sign = -sign;
        if term < 1e-12 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// The test-function family of the convex-order check.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TestFunction {
    /// Convex: x^2, x^3, exp(x ∧ 10) (capped to respect polynomial growth).
    Square,
    Cube,
    CappedExp,
    /// Concave: x^0.3, x^0.7.
    Pow03,
    Pow07,
}

impl TestFunction {
    pub const CONVEX: [TestFunction; 3] =
        [TestFunction::Square, TestFunction::Cube, TestFunction::CappedExp];
    pub const CONCAVE: [TestFunction; 2] = [TestFunction::Pow03, TestFunction::Pow07];

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            TestFunction::Square => x * x,
            TestFunction::Cube => x * x * x,
            TestFunction::CappedExp => x.min(10.0).exp(),
            TestFunction::Pow03 => x.powf(0.3),
            TestFunction::Pow07 => x.powf(0.7),
        }
    }

    pub fn is_convex(&self) -> bool {
        matches!(self, TestFunction::Square | TestFunction::Cube | TestFunction::CappedExp)
    }
}

/// One line of the Kahane comparison: `E[F(mass_A)]` vs `E[F(mass_B)]`.
#[derive(Debug, Clone)]
pub struct KahaneLine {
    pub f: TestFunction,
    pub mean_a: Estimate,
    pub mean_b: Estimate,
    /// Whether the comparison inequality holds within 2 combined SE
    /// (convex F: `E F(A) <= E F(B)`; concave F: reversed).
    pub holds: bool,
}

/// Kahane convex-order check for kernels `A <= B` (entrywise on the grid):
/// convex test functions must satisfy `E F(mass_A) <= E F(mass_B)` and
/// concave ones the reverse, each within 2 combined SE.
pub fn kahane_convex_order_check(
    cov_a: &CovarianceMatrix,
    cov_b: &CovarianceMatrix,
    grid: &Grid,
    kernel: &KernelSpec,
    n: usize,
    seed: u64,
) -> Result<Vec<KahaneLine>, GmcError> {
    let m = grid.len();
    if cov_a.entries.nrows() != m || cov_b.entries.nrows() != m {
        return Err(GmcError::invalid("covariance", "size does not match grid"));
    }
    for i in 0..m {
        for j in 0..m {
            if cov_a.entries[(i, j)] > cov_b.entries[(i, j)] + 1e-12 {
                return Err(GmcError::invalid(
                    "kernel ordering",
                    format!("A > B at entry ({i},{j}); comparison requires A <= B"),
                ));
            }
        }
    }
    // repair A first, then reuse its shift for B (B = A + PSD stays PD under
    // the same shift, and a shared shift preserves the entrywise ordering of
    // the actually-sampled covariances)
    let factor_a = factorize(cov_a, PdPolicy::AutoShift)?;
    let factor_b = factorize(cov_b, PdPolicy::DiagonalShift(factor_a.diagonal_added))?;

    let masses = |factor: &crate::field::Factor, sub_seed: u64| -> Result<Vec<f64>, GmcError> {
        let fields = sample_fields(factor, n, sub_seed, None)?;
        let gmc = gmc_weights(&fields, kernel, grid)?;
        region_mass(&gmc, grid, &RegionMask::All, &WeightFunction::One)
    };
    let mass_a = masses(&factor_a, seed)?;
    let mass_b = masses(&factor_b, seed.wrapping_add(0x4b61_6861))?;

    let mut out = Vec::new();
    for f in TestFunction::CONVEX.iter().chain(&TestFunction::CONCAVE) {
        let fa: Vec<f64> = mass_a.iter().map(|&x| f.eval(x)).collect();
        let fb: Vec<f64> = mass_b.iter().map(|&x| f.eval(x)).collect();
        let ea = mean_with_se(&fa)?;
        let eb = mean_with_se(&fb)?;
        let slack = 2.0 * (ea.se * ea.se + eb.se * eb.se).sqrt();
        let holds = if f.is_convex() {
            ea.value <= eb.value + slack
        } else {
            ea.value >= eb.value - slack
        };
        out.push(KahaneLine {
            f: *f,
            mean_a: ea,
            mean_b: eb,
            holds,
        });
    }
    Ok(out)
}

/// Convenience: the constant-shift comparison pair `(K, K + L)`.
pub fn shifted_kernel_pair(cov: &CovarianceMatrix, l: f64) -> (CovarianceMatrix, CovarianceMatrix) {
    let m = cov.entries.nrows();
    let shifted = &cov.entries + DMatrix::from_element(m, m, l);
    (cov.clone(), CovarianceMatrix { entries: shifted })
}

/// Verdict for one moment order in the Seiberg scan.
#[derive(Debug, Clone)]
pub struct MomentScanRow {
    pub p: f64,
    /// Median over seeds of `estimate(n_max) / estimate(n_min)`.
    pub growth_ratio: f64,
    /// `growing` when the ratio exceeds 1.5 (a >50% drift), else `stable`.
    pub growing: bool,
    pub theoretical_threshold: f64,
}

/// Classify each `p` in `p_grid` as stable/growing by the drift of the
/// empirical p-th moment across sample sizes `ns` (medians over `seeds`),
/// reporting the theoretical threshold `min(2d/gamma^2, (2/gamma)(Q-alpha))`
/// alongside. `draw(seed, n)` must produce `n` i.i.d. mass samples.
pub fn seiberg_moment_scan<F>(
    gamma: f64,
    d: usize,
    alpha: f64,
    p_grid: &[f64],
    ns: &[usize],
    seeds: &[u64],
    draw: F,
) -> Result<Vec<MomentScanRow>, GmcError>
where
    F: Fn(u64, usize) -> Result<Vec<f64>, GmcError>,
{
    if ns.len() < 2 {
        return Err(GmcError::invalid("ns", "need at least two sample sizes"));
    }
    let threshold = seiberg_threshold(gamma, d, alpha);
    // draw once per (seed, n) and reuse across p
    let mut samples = Vec::new();
    for &seed in seeds {
        let small = draw(seed, ns[0])?;
        let large = draw(seed, *ns.last().unwrap())?;
        samples.push((small, large));
    }
    let mut rows = Vec::new();
    for &p in p_grid {
        let mut ratios: Vec<f64> = samples
            .iter()
            .map(|(small, large)| {
                let ms = small.iter().map(|&x| x.powf(p)).sum::<f64>() / small.len() as f64;
                let ml = large.iter().map(|&x| x.powf(p)).sum::<f64>() / large.len() as f64;
                ml / ms
            })
            .collect();
        ratios.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
        let growth_ratio = ratios[ratios.len() / 2];
        rows.push(MomentScanRow {
            p,
            growth_ratio,
            growing: growth_ratio > 1.5,
            theoretical_threshold: threshold,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{evaluate_kernel_matrix, DomainSpec, FSpec};
    use crate::tail::pareto_samples;
    use approx::assert_relative_eq;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn ks_identical_samples() {
        let a = vec![1.0, 2.0, 3.0, 4.0];
        let r = ks_two_sample(&a, &a).unwrap();
        assert_relative_eq!(r.statistic, 0.0);
        assert!(r.p_value > 0.99);
    }

    #[test]
    fn ks_disjoint_supports() {
        let a = vec![0.1, 0.5, 0.9];
        let b = vec![2.1, 2.5, 2.9];
        let r = ks_two_sample(&a, &b).unwrap();
        assert_relative_eq!(r.statistic, 1.0);
        assert!(r.p_value < 0.1);
    }

    #[test]
    fn ks_invariant_under_monotone_transform() {
        let a = pareto_samples(1.0, 2.0, 2000, 1);
        let b = pareto_samples(1.0, 2.0, 1500, 2);
        let r1 = ks_two_sample(&a, &b).unwrap();
        let ta: Vec<f64> = a.iter().map(|&x| x.ln()).collect();
        let tb: Vec<f64> = b.iter().map(|&x| x.ln()).collect();
        let r2 = ks_two_sample(&ta, &tb).unwrap();
        assert_relative_eq!(r1.statistic, r2.statistic, epsilon = 1e-12);
    }

    #[test]
    fn ks_null_p_values_roughly_uniform() {
        // 200 repetitions of Uniform(0,1) vs Uniform(0,1) at n = 1000:
        // p-values should be roughly uniform (coarse chi-square screen)
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut bins = [0usize; 4];
        let reps = 200;
        for _ in 0..reps {
            let a: Vec<f64> = (0..1000).map(|_| rng.gen::<f64>()).collect();
            let b: Vec<f64> = (0..1000).map(|_| rng.gen::<f64>()).collect();
            let p = ks_two_sample(&a, &b).unwrap().p_value;
            bins[((p * 4.0) as usize).min(3)] += 1;
        }
        let expected = reps as f64 / 4.0;
        let chi2: f64 = bins.iter().map(|&o| (o as f64 - expected).powi(2) / expected).sum();
        // 3 dof, 99.9% quantile ~ 16.3
        assert!(chi2 < 16.3, "chi2 {chi2} bins {bins:?}");
    }

    fn grid_and_kernel() -> (KernelSpec, Grid) {
        let dom = DomainSpec::interval(0.0, 1.0).unwrap();
        let grid = Grid::regular(&dom, &[32]).unwrap();
        let kernel = KernelSpec::new(dom, FSpec::Zero, 0.8, grid.spacing[0]).unwrap();
        (kernel, grid)
    }

    #[test]
    fn kahane_identical_kernels_all_within_se() {
        let (kernel, grid) = grid_and_kernel();
        let cov = evaluate_kernel_matrix(&kernel, &grid).unwrap();
        let lines = kahane_convex_order_check(&cov, &cov, &grid, &kernel, 4000, 3).unwrap();
        for l in &lines {
            assert!(l.holds, "{l:?}");
        }
    }

    #[test]
    fn kahane_shifted_kernel_orderings() {
        let (kernel, grid) = grid_and_kernel();
        let cov = evaluate_kernel_matrix(&kernel, &grid).unwrap();
        let (a, b) = shifted_kernel_pair(&cov, 1.0);
        let lines = kahane_convex_order_check(&a, &b, &grid, &kernel, 8000, 4).unwrap();
        for l in &lines {
            assert!(l.holds, "{l:?}");
        }
        // the convex direction should be strict here, not just within slack
        let square = lines.iter().find(|l| l.f == TestFunction::Square).unwrap();
        assert!(square.mean_a.value < square.mean_b.value);
        let concave = lines.iter().find(|l| l.f == TestFunction::Pow03).unwrap();
        assert!(concave.mean_a.value > concave.mean_b.value);
    }

    #[test]
    fn kahane_refuses_unordered_kernels() {
        let (kernel, grid) = grid_and_kernel();
        let cov = evaluate_kernel_matrix(&kernel, &grid).unwrap();
        let (a, b) = shifted_kernel_pair(&cov, 1.0);
        assert!(kahane_convex_order_check(&b, &a, &grid, &kernel, 100, 0).is_err());
    }

    #[test]
    fn moment_scan_classifies_pareto() {
        // Pareto with tail index 2: p = 1 stable, p = 2.5 growing
        let draw = |seed: u64, n: usize| Ok(pareto_samples(1.0, 2.0, n, seed));
        let rows = seiberg_moment_scan(
            1.0,
            1,
            0.0,
            &[1.0, 2.5],
            &[1000, 100_000],
            &[0, 1, 2, 3, 4, 5, 6, 7, 8, 9],
            draw,
        )
        .unwrap();
        assert!(!rows[0].growing, "{:?}", rows[0]);
        assert!(rows[1].growing, "{:?}", rows[1]);
        // alpha = 0 threshold is 2d/gamma^2
        assert_relative_eq!(rows[0].theoretical_threshold, 2.0, epsilon = 1e-12);
    }
}
