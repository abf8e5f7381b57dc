//! Log-correlated Gaussian field sampling on regular grids.
//!
//! The covariance model is `K(x,y) = -log(|x-y| ∨ eps) + f(x,y)` on a box
//! domain, evaluated as a dense symmetric matrix over grid cell centers,
//! Cholesky-factorized (with an explicit positive-definiteness repair
//! policy), and sampled replicate by replicate with counter-based seeding so
//! that replicate `k` depends only on `(seed, k)`.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::GmcError;

/// Box domain in dimension `d` (1 ≤ d ≤ 3).
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct DomainSpec {
    pub dim: usize,
    /// Per-axis closed interval bounds `(lo, hi)`.
    pub bounds: Vec<(f64, f64)>,
}

impl DomainSpec {
    pub fn new(bounds: Vec<(f64, f64)>) -> Result<Self, GmcError> {
        let dim = bounds.len();
        if !(1..=3).contains(&dim) {
            return Err(GmcError::invalid("dimension", format!("d = {dim} not in {{1,2,3}}")));
        }
        for &(lo, hi) in &bounds {
            if !(hi > lo) {
                return Err(GmcError::invalid("bounds", format!("empty interval [{lo}, {hi}]")));
            }
        }
        Ok(DomainSpec { dim, bounds })
    }

    /// Convenience constructor for a 1-d interval.
    pub fn interval(lo: f64, hi: f64) -> Result<Self, GmcError> {
        DomainSpec::new(vec![(lo, hi)])
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim
            && x.iter()
                .zip(&self.bounds)
                .all(|(&xi, &(lo, hi))| xi >= lo && xi <= hi)
    }
}

/// Regular grid of cell centers with uniform per-axis spacing.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub dim: usize,
    /// Flattened coordinates, `dim` entries per point.
    coords: Vec<f64>,
    pub spacing: Vec<f64>,
    pub cell_volume: f64,
}

impl Grid {
    /// Build the grid of cell centers: axis `a` gets `counts[a]` cells, the
    /// center of cell `i` sitting at `lo + (i + 1/2) h`.
    pub fn regular(domain: &DomainSpec, counts: &[usize]) -> Result<Self, GmcError> {
        if counts.len() != domain.dim || counts.iter().any(|&c| c == 0) {
            return Err(GmcError::invalid("grid counts", "must give a positive count per axis"));
        }
        let spacing: Vec<f64> = domain
            .bounds
            .iter()
            .zip(counts)
            .map(|(&(lo, hi), &c)| (hi - lo) / c as f64)
            .collect();
        let cell_volume: f64 = spacing.iter().product();

        let npoints: usize = counts.iter().product();
        let mut coords = Vec::with_capacity(npoints * domain.dim);
        let mut index = vec![0usize; domain.dim];
        for _ in 0..npoints {
            for a in 0..domain.dim {
                coords.push(domain.bounds[a].0 + (index[a] as f64 + 0.5) * spacing[a]);
            }
            // odometer increment
            for a in (0..domain.dim).rev() {
                index[a] += 1;
                if index[a] < counts[a] {
                    break;
                }
                index[a] = 0;
            }
        }
        Ok(Grid {
            dim: domain.dim,
            coords,
            spacing,
            cell_volume,
        })
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.dim)
    }

    /// Index of the grid point closest to `x`.
    pub fn nearest(&self, x: &[f64]) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, p) in self.points().enumerate() {
            let d = euclid(p, x);
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }
}

pub fn euclid(x: &[f64], y: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

/// The continuous part `f` of the kernel.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub enum FSpec {
    /// f ≡ 0 (exact kernel).
    Zero,
    /// f ≡ L (L-exact kernel).
    Constant(f64),
    /// f(x,y) = cos(x·1 − y·1) (sum of coordinates); positive definite.
    Cosine,
    /// f(x,y) = exp(−|x−y|²); positive definite bump.
    GaussianBump,
    /// Symmetric matrix of values over the working grid (index-based).
    Tabulated(Vec<Vec<f64>>),
}

impl FSpec {
    /// Evaluate `f` at a pair of points; for `Tabulated` the grid indices are
    /// required and coordinates are ignored.
    pub fn eval(&self, x: &[f64], y: &[f64], ij: Option<(usize, usize)>) -> f64 {
        match self {
            FSpec::Zero => 0.0,
            FSpec::Constant(l) => *l,
            FSpec::Cosine => {
                let sx: f64 = x.iter().sum();
                let sy: f64 = y.iter().sum();
                (sx - sy).cos()
            }
            FSpec::GaussianBump => {
                let d = euclid(x, y);
                (-d * d).exp()
            }
            FSpec::Tabulated(m) => {
                let (i, j) = ij.expect("tabulated f requires grid indices");
                m[i][j]
            }
        }
    }
}

/// The covariance law `K(x,y) = -log(|x-y| ∨ eps) + f(x,y)` with its domain
/// and GMC parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelSpec {
    pub domain: DomainSpec,
    pub f: FSpec,
    pub gamma: f64,
    pub epsilon: f64,
}

impl KernelSpec {
    pub fn new(domain: DomainSpec, f: FSpec, gamma: f64, epsilon: f64) -> Result<Self, GmcError> {
        let d = domain.dim as f64;
        if !(gamma > 0.0 && gamma * gamma < 2.0 * d) {
            return Err(GmcError::invalid(
                "gamma",
                format!("subcritical only: need 0 < gamma < sqrt(2d) = {:.4}, got {gamma}", (2.0 * d).sqrt()),
            ));
        }
        if !(epsilon > 0.0) {
            return Err(GmcError::invalid("epsilon", "truncation scale must be positive"));
        }
        Ok(KernelSpec { domain, f, gamma, epsilon })
    }

    pub fn dim(&self) -> usize {
        self.domain.dim
    }

    /// Q = gamma/2 + d/gamma.
    pub fn big_q(&self) -> f64 {
        self.gamma / 2.0 + self.domain.dim as f64 / self.gamma
    }

    /// Tail index q = 2d/gamma^2 − 1 of the rooted mass at alpha = gamma.
    pub fn q_index(&self) -> f64 {
        2.0 * self.domain.dim as f64 / (self.gamma * self.gamma) - 1.0
    }

    /// Truncated kernel value at a pair of points.
    pub fn eval(&self, x: &[f64], y: &[f64], ij: Option<(usize, usize)>) -> f64 {
        -euclid(x, y).max(self.epsilon).ln() + self.f.eval(x, y, ij)
    }
}

/// Dense symmetric covariance matrix over a grid.
#[derive(Debug, Clone)]
pub struct CovarianceMatrix {
    pub entries: DMatrix<f64>,
}

impl CovarianceMatrix {
    pub fn variances(&self) -> DVector<f64> {
        self.entries.diagonal()
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().fold(0.0f64, |a, &x| a.max(x.abs()))
    }
}

/// Evaluate the truncated covariance kernel on a grid.
pub fn evaluate_kernel_matrix(kernel: &KernelSpec, grid: &Grid) -> Result<CovarianceMatrix, GmcError> {
    for p in grid.points() {
        if !kernel.domain.contains(p) {
            return Err(GmcError::invalid("grid", "grid point outside kernel domain"));
        }
    }
    let m = grid.len();
    let mut entries = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in i..m {
            let v = kernel.eval(grid.point(i), grid.point(j), Some((i, j)));
            entries[(i, j)] = v;
            entries[(j, i)] = v;
        }
    }
    Ok(CovarianceMatrix { entries })
}

/// Smallest eigenvalue of the covariance matrix together with a PD verdict.
///
/// The verdict uses the relative threshold `min_eig > -1e-8 * max_abs_entry`;
/// it certifies a working radius before sampling is attempted.
pub fn pd_probe(kernel: &KernelSpec, grid: &Grid) -> Result<(f64, bool), GmcError> {
    if grid.is_empty() {
        return Err(GmcError::invalid("grid", "empty grid"));
    }
    let cov = evaluate_kernel_matrix(kernel, grid)?;
    let min_eig = min_eigenvalue(&cov.entries);
    let scale = cov.max_abs();
    Ok((min_eig, min_eig > -1e-8 * scale))
}

fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    let eig = m.clone().symmetric_eigen();
    eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)
}

/// How to repair an indefinite covariance before factorization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PdPolicy {
    /// Tiny-jitter escalation only: start at `1e-10 * trace/n`, multiply by 10
    /// at most 6 times, refuse if still indefinite. Distinguishes floating-point
    /// noise from a genuine PD-radius violation.
    Jitter,
    /// Add a fixed constant to the diagonal (an independent nugget per grid
    /// point). The sampled field then carries the extra variance, and the GMC
    /// normalization uses the boosted diagonal, so mean-one weights are exact;
    /// only sub-`eps` correlation structure is distorted.
    DiagonalShift(f64),
    /// Measure the minimum eigenvalue and add just enough diagonal to clear it.
    AutoShift,
}

/// Lower-triangular factor of a (possibly diagonally repaired) covariance.
#[derive(Debug, Clone)]
pub struct Factor {
    pub l: DMatrix<f64>,
    /// Diagonal of the matrix that was actually factorized (kernel variances
    /// plus any repair shift); this is what GMC normalization must use.
    pub variances: DVector<f64>,
    /// Total constant added to the diagonal by the repair policy.
    pub diagonal_added: f64,
}

impl Factor {
    pub fn npoints(&self) -> usize {
        self.l.nrows()
    }

    /// `max_ij |L L^T - cov|` for verification against the original matrix.
    pub fn reconstruction_error(&self, cov: &CovarianceMatrix) -> f64 {
        let rec = &self.l * self.l.transpose();
        let mut err = 0.0f64;
        for i in 0..rec.nrows() {
            for j in 0..rec.ncols() {
                let target = cov.entries[(i, j)] + if i == j { self.diagonal_added } else { 0.0 };
                err = err.max((rec[(i, j)] - target).abs());
            }
        }
        err
    }
}

/// Cholesky-factorize a covariance matrix under the given repair policy.
pub fn factorize(cov: &CovarianceMatrix, policy: PdPolicy) -> Result<Factor, GmcError> {
    let n = cov.entries.nrows();
    let try_chol = |shift: f64| -> Option<DMatrix<f64>> {
        let mut m = cov.entries.clone();
        for i in 0..n {
            m[(i, i)] += shift;
        }
        nalgebra::Cholesky::new(m).map(|c| c.l())
    };
    let finish = |l: DMatrix<f64>, shift: f64| {
        let mut variances = cov.variances();
        for v in variances.iter_mut() {
            *v += shift;
        }
        Factor {
            l,
            variances,
            diagonal_added: shift,
        }
    };

    match policy {
        PdPolicy::Jitter => {
            if let Some(l) = try_chol(0.0) {
                return Ok(finish(l, 0.0));
            }
            let mut jitter = 1e-10 * cov.entries.trace() / n as f64;
            for _ in 0..=6 {
                if let Some(l) = try_chol(jitter) {
                    return Ok(finish(l, jitter));
                }
                jitter *= 10.0;
            }
            Err(GmcError::NotPositiveDefinite {
                min_eigenvalue: min_eigenvalue(&cov.entries),
            })
        }
        PdPolicy::DiagonalShift(s) => {
            if s < 0.0 {
                return Err(GmcError::invalid("diagonal shift", "must be nonnegative"));
            }
            try_chol(s).map(|l| finish(l, s)).ok_or_else(|| GmcError::NotPositiveDefinite {
                min_eigenvalue: min_eigenvalue(&cov.entries) + s,
            })
        }
        PdPolicy::AutoShift => {
            if let Some(l) = try_chol(0.0) {
                return Ok(finish(l, 0.0));
            }
            let min_eig = min_eigenvalue(&cov.entries);
            let mut shift = (-min_eig).max(0.0) * 1.001 + 1e-12;
            for _ in 0..8 {
                if let Some(l) = try_chol(shift) {
                    return Ok(finish(l, shift));
                }
                shift *= 1.1;
            }
            Err(GmcError::NotPositiveDefinite { min_eigenvalue: min_eig })
        }
    }
}

/// i.i.d. replicates of the discretized field; column `k` is replicate `k`.
#[derive(Debug, Clone)]
pub struct FieldEnsemble {
    /// `npoints x n` matrix of field values.
    pub samples: DMatrix<f64>,
    pub variances: DVector<f64>,
    pub seed: u64,
    /// Index of the first replicate in this (possibly chunked) ensemble.
    pub first_replicate: usize,
}

impl FieldEnsemble {
    pub fn n(&self) -> usize {
        self.samples.ncols()
    }

    pub fn replicate(&self, k: usize) -> nalgebra::DVectorView<'_, f64> {
        self.samples.column(k)
    }
}

/// SplitMix64 step, used to derive the per-replicate stream seed from
/// `(seed, replicate index)` so that output never depends on batching.
fn mix_seed(seed: u64, k: u64) -> u64 {
    let mut z = seed ^ k.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Internal batch width of the matrix product. Requested ranges are served
/// from blocks aligned to absolute replicate indices, so the floating-point
/// evaluation of replicate `k` is identical no matter how a caller chunks its
/// requests (a gemm's rounding can depend on the batch shape otherwise).
const SAMPLE_BLOCK: usize = 256;

/// Draw replicates `first..first+count` as `mean + L z_k`, `z_k` standard
/// normal with a ChaCha stream keyed by `(seed, k)`.
pub fn sample_replicates(
    factor: &Factor,
    first: usize,
    count: usize,
    seed: u64,
    mean: Option<&[f64]>,
) -> Result<FieldEnsemble, GmcError> {
    let m = factor.npoints();
    if let Some(mu) = mean {
        if mu.len() != m {
            return Err(GmcError::invalid("mean", "length does not match grid size"));
        }
    }
    let mut samples = DMatrix::zeros(m, count);
    if count > 0 {
        let first_block = first / SAMPLE_BLOCK;
        let last_block = (first + count - 1) / SAMPLE_BLOCK;
        let mut z = DMatrix::zeros(m, SAMPLE_BLOCK);
        for b in first_block..=last_block {
            let base = b * SAMPLE_BLOCK;
            for k in 0..SAMPLE_BLOCK {
                let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, (base + k) as u64));
                for i in 0..m {
                    z[(i, k)] = StandardNormal.sample(&mut rng);
                }
            }
            let x = &factor.l * &z;
            let lo = first.max(base);
            let hi = (first + count).min(base + SAMPLE_BLOCK);
            for k in lo..hi {
                samples.column_mut(k - first).copy_from(&x.column(k - base));
            }
        }
    }
    if let Some(mu) = mean {
        for k in 0..count {
            for i in 0..m {
                samples[(i, k)] += mu[i];
            }
        }
    }
    Ok(FieldEnsemble {
        samples,
        variances: factor.variances.clone(),
        seed,
        first_replicate: first,
    })
}

/// Draw `n` i.i.d. replicates (replicates `0..n`).
pub fn sample_fields(
    factor: &Factor,
    n: usize,
    seed: u64,
    mean: Option<&[f64]>,
) -> Result<FieldEnsemble, GmcError> {
    sample_replicates(factor, 0, n, seed, mean)
}

/// Positive/negative split of a symmetric kernel matrix by eigenvalue sign.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    pub positive_part: DMatrix<f64>,
    pub negative_part: DMatrix<f64>,
    pub residual_norm: f64,
}

/// Eigendecompose `f_matrix` and split into PSD parts: eigenvalues below
/// `-tolerance` go (negated) to the negative part, everything else to the
/// positive part, so both parts are PSD within `tolerance` and
/// `positive - negative` reconstructs the input.
pub fn decompose_kernel(f_matrix: &DMatrix<f64>, tolerance: f64) -> Result<SpectralDecomposition, GmcError> {
    if f_matrix.nrows() != f_matrix.ncols() {
        return Err(GmcError::invalid("f matrix", "must be square"));
    }
    let n = f_matrix.nrows();
    let eig = f_matrix.clone().symmetric_eigen();
    let mut pos = DMatrix::zeros(n, n);
    let mut neg = DMatrix::zeros(n, n);
    for (idx, &lambda) in eig.eigenvalues.iter().enumerate() {
        let v = eig.eigenvectors.column(idx);
        let outer = &v * v.transpose();
        if lambda < -tolerance {
            neg += outer * (-lambda);
        } else {
            pos += outer * lambda;
        }
    }
    let residual = {
        let r = &pos - &neg - f_matrix;
        r.iter().fold(0.0f64, |a, &x| a.max(x.abs()))
    };
    Ok(SpectralDecomposition {
        positive_part: pos,
        negative_part: neg,
        residual_norm: residual,
    })
}

/// Cameron–Martin mean vector pinning a gamma-thick point at `v`:
/// entry `gamma (-log(|x - v| ∨ eps) + f(x, v))` at each grid point `x`.
pub fn cameron_martin_mean(kernel: &KernelSpec, grid: &Grid, v: &[f64]) -> Result<Vec<f64>, GmcError> {
    if !kernel.domain.contains(v) {
        return Err(GmcError::invalid("v", "root point outside domain"));
    }
    // tabulated f needs an index for v; use the nearest grid point
    let vj = match kernel.f {
        FSpec::Tabulated(_) => Some(grid.nearest(v)),
        _ => None,
    };
    Ok((0..grid.len())
        .map(|i| kernel.gamma * kernel.eval(grid.point(i), v, vj.map(|j| (i, j))))
        .collect())
}
