//! On-disk cache for covariance factorizations.
//!
//! The cache directory is selected by the `GMC_CACHE_DIR` environment
//! variable; when it is unset no caching happens. Entries are keyed by a
//! hash of everything the factor depends on (domain, f, gamma, epsilon,
//! grid resolution, repair policy), and the payload is a bit-exact dump of
//! the factor, so cold and warm runs produce identical results.

use gmc_core::field::{
    evaluate_kernel_matrix, factorize, CovarianceMatrix, Factor, FSpec, Grid, KernelSpec, PdPolicy,
};
use nalgebra::{DMatrix, DVector};
use sha2::{Digest, Sha256};
use std::io::{Read, Write};
use std::path::PathBuf;

pub const CACHE_ENV: &str = "GMC_CACHE_DIR";

const MAGIC: &[u8; 8] = b"GMCFAC01";

fn cache_dir() -> Option<PathBuf> {
    std::env::var_os(CACHE_ENV).map(PathBuf::from)
}

fn factor_key(kernel: &KernelSpec, grid: &Grid, policy: PdPolicy) -> String {
    let mut h = Sha256::new();
    for (lo, hi) in &kernel.domain.bounds {
        h.update(lo.to_le_bytes());
        h.update(hi.to_le_bytes());
    }
    match &kernel.f {
        FSpec::Zero => h.update(b"zero"),
        FSpec::Constant(l) => {
            h.update(b"const");
            h.update(l.to_le_bytes());
        }
        FSpec::Cosine => h.update(b"cosine"),
        FSpec::GaussianBump => h.update(b"bump"),
        FSpec::Tabulated(m) => {
            h.update(b"tab");
            for row in m {
                for v in row {
                    h.update(v.to_le_bytes());
                }
            }
        }
    }
    h.update(kernel.gamma.to_le_bytes());
    h.update(kernel.epsilon.to_le_bytes());
    h.update((grid.len() as u64).to_le_bytes());
    for s in &grid.spacing {
        h.update(s.to_le_bytes());
    }
    match policy {
        PdPolicy::Jitter => h.update(b"jitter"),
        PdPolicy::AutoShift => h.update(b"autoshift"),
        PdPolicy::DiagonalShift(s) => {
            h.update(b"diag");
            h.update(s.to_le_bytes());
        }
    }
    hex::encode(h.finalize())
}

fn write_factor(path: &PathBuf, factor: &Factor) -> std::io::Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(MAGIC)?;
        let m = factor.l.nrows() as u64;
        f.write_all(&m.to_le_bytes())?;
        f.write_all(&factor.diagonal_added.to_le_bytes())?;
        for v in factor.l.iter() {
            f.write_all(&v.to_le_bytes())?;
        }
        for v in factor.variances.iter() {
            f.write_all(&v.to_le_bytes())?;
        }
    }
    std::fs::rename(tmp, path)
}

fn read_factor(path: &PathBuf) -> Option<Factor> {
    let mut f = std::fs::File::open(path).ok()?;
    let mut magic = [0u8; 8];
    f.read_exact(&mut magic).ok()?;
    if &magic != MAGIC {
        return None;
    }
    let mut buf8 = [0u8; 8];
    f.read_exact(&mut buf8).ok()?;
    let m = u64::from_le_bytes(buf8) as usize;
    f.read_exact(&mut buf8).ok()?;
    let diagonal_added = f64::from_le_bytes(buf8);
    let mut read_f64s = |count: usize| -> Option<Vec<f64>> {
        let mut out = Vec::with_capacity(count);
        for _ in 0..count {
            let mut b = [0u8; 8];
            f.read_exact(&mut b).ok()?;
            out.push(f64::from_le_bytes(b));
        }
        Some(out)
    };
    let l_data = read_f64s(m * m)?;
    let var_data = read_f64s(m)?;
    Some(Factor {
        l: DMatrix::from_vec(m, m, l_data),
        variances: DVector::from_vec(var_data),
        diagonal_added,
    })
}

/// Factorize the kernel on the grid, reusing an on-disk factor when the
/// cache is enabled and the key matches.
pub fn cached_factorize(
    kernel: &KernelSpec,
    grid: &Grid,
    policy: PdPolicy,
) -> Result<(Factor, bool), String> {
    let dir = cache_dir();
    let path = dir.as_ref().map(|d| {
        let key = factor_key(kernel, grid, policy);
        d.join(format!("factor-{key}.bin"))
    });
    if let Some(p) = &path {
        if let Some(factor) = read_factor(p) {
            return Ok((factor, true));
        }
    }
    let cov: CovarianceMatrix = evaluate_kernel_matrix(kernel, grid).map_err(|e| e.to_string())?;
    let factor = factorize(&cov, policy).map_err(|e| e.to_string())?;
    if let Some(p) = &path {
        if let Some(parent) = p.parent() {
            let _ = std::fs::create_dir_all(parent);
        }
        let _ = write_factor(p, &factor);
    }
    Ok((factor, false))
}
