//! Experiment dispatch: each kind turns a validated config into one tabular
//! file (CSV, LF, headers) and one JSON summary record. Identical
//! (config, seed) pairs produce byte-identical tabular output.

use crate::cache::cached_factorize;
use crate::config::{ExperimentConfig, ExperimentKind, TauberianBlock};
use gmc_core::diagnostics::{kahane_convex_order_check, ks_two_sample, shifted_kernel_pair};
use gmc_core::field::{evaluate_kernel_matrix, sample_replicates, Factor, Grid, KernelSpec, PdPolicy};
use gmc_core::measure::{
    gmc_weights, moment_estimate, region_mass, singular_mass, RegionMask, WeightFunction,
};
use gmc_core::reflection::{
    bare_rooted_samples, closed_form_coefficient, reflection_coeff_scaling,
    reflection_epsilon_sweep, scaling_transport, McConfig,
};
use gmc_core::stats::log_grid;
use gmc_core::tail::{
    goldie_condition_report, goldie_constant, hill_estimator, lap_co_asymptote,
    laplace_tail_coefficient, pareto_samples, GoldieProblem,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde_json::{json, Map, Value};
use std::path::{Path, PathBuf};
use std::time::Instant;

const CHUNK: usize = 256;

/// Tabular result: headers plus stringified rows, written as-is.
pub struct Table {
    pub headers: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

pub struct RunOutput {
    pub table: Table,
    pub summary: Map<String, Value>,
}

fn fmt(v: f64) -> String {
    // shortest round-trip formatting; deterministic across runs
    format!("{v}")
}

/// Draw `n` region masses in fixed-size chunks from a prebuilt factor.
fn chunked_masses(
    factor: &Factor,
    kernel: &KernelSpec,
    grid: &Grid,
    mask: &RegionMask,
    g: &WeightFunction,
    n: usize,
    seed: u64,
) -> Result<Vec<f64>, String> {
    let mut out = Vec::with_capacity(n);
    let mut start = 0;
    while start < n {
        let count = CHUNK.min(n - start);
        let fields = sample_replicates(factor, start, count, seed, None).map_err(|e| e.to_string())?;
        let gmc = gmc_weights(&fields, kernel, grid).map_err(|e| e.to_string())?;
        out.extend(region_mass(&gmc, grid, mask, g).map_err(|e| e.to_string())?);
        start += count;
    }
    Ok(out)
}

pub fn run_experiment(kind: ExperimentKind, cfg: &ExperimentConfig) -> Result<RunOutput, String> {
    let started = Instant::now();
    let mut out = match kind {
        ExperimentKind::Tail => run_tail(cfg)?,
        ExperimentKind::Reflection => run_reflection(cfg, None)?,
        ExperimentKind::ReflectionAlpha => {
            let alpha = cfg.gmc.alpha.expect("validated");
            run_reflection(cfg, Some(alpha))?
        }
        ExperimentKind::Scaling => run_scaling(cfg)?,
        ExperimentKind::Goldie => run_goldie(cfg)?,
        ExperimentKind::Tauberian => run_tauberian(cfg)?,
        ExperimentKind::Diagnostics => run_diagnostics(cfg)?,
        ExperimentKind::Moments => run_moments(cfg)?,
    };
    let record = &mut out.summary;
    record.insert("experiment".into(), json!(kind.to_string()));
    record.insert("config_hash".into(), json!(cfg.hash(kind)));
    record.insert("seed".into(), json!(cfg.seed()));
    record.insert("workers".into(), json!(cfg.mc.workers.unwrap_or(1)));
    record.insert("n".into(), json!(cfg.mc.n));
    record.insert(
        "library_version".into(),
        json!(env!("CARGO_PKG_VERSION")),
    );
    record.insert(
        "wall_time_s".into(),
        json!(started.elapsed().as_secs_f64()),
    );
    Ok(out)
}

fn mc_config(cfg: &ExperimentConfig) -> McConfig {
    McConfig {
        n: cfg.mc.n,
        seed: cfg.seed(),
        points_per_axis: cfg.grid.points_per_axis,
    }
}

fn run_tail(cfg: &ExperimentConfig) -> Result<RunOutput, String> {
    let (kernel, grid) = cfg.build_kernel_grid()?;
    let (factor, cache_hit) = cached_factorize(&kernel, &grid, PdPolicy::AutoShift)?;
    let masses = chunked_masses(
        &factor,
        &kernel,
        &grid,
        &cfg.region(),
        &cfg.weight(),
        cfg.mc.n,
        cfg.seed(),
    )?;
    let n = masses.len();
    let mut ks: Vec<usize> = [n / 200, n / 100, n / 50, n / 20]
        .into_iter()
        .map(|k| k.max(10).min(n.saturating_sub(1)))
        .collect();
    ks.dedup();
    let mut rows = Vec::new();
    for &k in &ks {
        let est = hill_estimator(&masses, k).map_err(|e| e.to_string())?;
        rows.push(vec![k.to_string(), fmt(est.exponent), fmt(est.exponent_se)]);
    }
    let k_main = (n / 100).max(10);
    let main = hill_estimator(&masses, k_main).map_err(|e| e.to_string())?;
    let mut summary = Map::new();
    summary.insert("hill_exponent".into(), json!(main.exponent));
    summary.insert("hill_exponent_se".into(), json!(main.exponent_se));
    summary.insert("hill_k".into(), json!(k_main));
    summary.insert("cache_hit".into(), json!(cache_hit));
    Ok(RunOutput {
        table: Table {
            headers: vec!["hill_k", "hill_exponent", "hill_exponent_se"],
            rows,
        },
        summary,
    })
}

fn run_reflection(cfg: &ExperimentConfig, alpha: Option<f64>) -> Result<RunOutput, String> {
    let gamma = cfg.gmc.gamma;
    let d = cfg.kernel.d;
    let r = cfg.gmc.radius.expect("validated");
    let c = cfg.gmc.c.expect("validated");
    let mc = mc_config(cfg);
    let a = alpha.unwrap_or(gamma);
    let mut rows = Vec::new();
    let finest = if alpha.is_none() {
        let levels = cfg.gmc.levels.unwrap_or(3);
        let sweep = reflection_epsilon_sweep(gamma, d, a, r, c, &mc, PdPolicy::AutoShift, levels)
            .map_err(|e| e.to_string())?;
        for (lvl, est) in sweep.iter().enumerate() {
            rows.push(vec![
                lvl.to_string(),
                fmt(est.epsilon),
                fmt(est.value),
                fmt(est.se),
                est.n.to_string(),
            ]);
        }
        sweep.into_iter().last().expect("levels >= 1")
    } else {
        let est = reflection_coeff_scaling(gamma, d, a, r, c, &mc, PdPolicy::AutoShift)
            .map_err(|e| e.to_string())?;
        rows.push(vec![
            "0".into(),
            fmt(est.epsilon),
            fmt(est.value),
            fmt(est.se),
            est.n.to_string(),
        ]);
        est
    };
    let mut summary = Map::new();
    summary.insert("coefficient".into(), json!(finest.value));
    summary.insert("coefficient_se".into(), json!(finest.se));
    summary.insert("q".into(), json!(finest.q()));
    summary.insert("alpha".into(), json!(a));
    summary.insert("epsilon".into(), json!(finest.epsilon));
    // closed-form anchor, available at alpha = gamma in d = 1, 2
    let reference = if alpha.is_none() {
        closed_form_coefficient(gamma, d).ok()
    } else {
        None
    };
    summary.insert(
        "closed_form_reference".into(),
        reference.map(|v| json!(v)).unwrap_or(Value::Null),
    );
    Ok(RunOutput {
        table: Table {
            headers: vec!["level", "epsilon", "coefficient", "coefficient_se", "n"],
            rows,
        },
        summary,
    })
}

fn run_scaling(cfg: &ExperimentConfig) -> Result<RunOutput, String> {
    let gamma = cfg.gmc.gamma;
    let d = cfg.kernel.d;
    let r = cfg.gmc.radius.expect("validated");
    let c = cfg.gmc.c.expect("validated");
    let mc = mc_config(cfg);
    let at_r = bare_rooted_samples(gamma, d, gamma, r, &mc, PdPolicy::AutoShift)
        .map_err(|e| e.to_string())?;
    let transported =
        scaling_transport(&at_r, c, gamma, d, mc.seed).map_err(|e| e.to_string())?;
    let mc_direct = McConfig {
        seed: mc.seed.wrapping_add(1),
        ..mc
    };
    let direct = bare_rooted_samples(gamma, d, gamma, c * r, &mc_direct, PdPolicy::AutoShift)
        .map_err(|e| e.to_string())?;
    let ks = ks_two_sample(&transported, &direct).map_err(|e| e.to_string())?;
    let row = vec![
        fmt(ks.statistic),
        fmt(ks.p_value),
        ks.n_a.to_string(),
        ks.n_b.to_string(),
    ];
    let mut summary = Map::new();
    summary.insert("ks_statistic".into(), json!(ks.statistic));
    summary.insert("ks_p_value".into(), json!(ks.p_value));
    summary.insert("n_transported".into(), json!(ks.n_a));
    summary.insert("n_direct".into(), json!(ks.n_b));
    Ok(RunOutput {
        table: Table {
            headers: vec!["ks_statistic", "ks_p_value", "n_transported", "n_direct"],
            rows: vec![row],
        },
        summary,
    })
}

fn run_goldie(cfg: &ExperimentConfig) -> Result<RunOutput, String> {
    let gamma = cfg.gmc.gamma;
    let d = cfg.kernel.d;
    let r = cfg.gmc.radius.expect("validated");
    let c = cfg.gmc.c.expect("validated");
    let q = 2.0 * d as f64 / (gamma * gamma) - 1.0;
    let n = cfg.mc.n;
    let seed = cfg.seed();
    // nested coupling on one field: U over the r-ball, V over the cr-ball
    let domain = gmc_core::field::DomainSpec::new(vec![(-r, r); d]).map_err(|e| e.to_string())?;
    let grid = Grid::regular(&domain, &vec![cfg.grid.points_per_axis; d]).map_err(|e| e.to_string())?;
    let kernel = KernelSpec::new(domain, gmc_core::field::FSpec::Zero, gamma, grid.spacing[0])
        .map_err(|e| e.to_string())?;
    let (factor, cache_hit) = cached_factorize(&kernel, &grid, PdPolicy::AutoShift)?;
    let v0 = vec![0.0; d];
    let g = WeightFunction::One;
    let mut u = Vec::with_capacity(n);
    let mut v = Vec::with_capacity(n);
    let mut start = 0;
    while start < n {
        let count = CHUNK.min(n - start);
        let fields = sample_replicates(&factor, start, count, seed, None).map_err(|e| e.to_string())?;
        let gmc = gmc_weights(&fields, &kernel, &grid).map_err(|e| e.to_string())?;
        u.extend(singular_mass(&gmc, &grid, &v0, r, gamma, &kernel, &g, false).map_err(|e| e.to_string())?);
        v.extend(singular_mass(&gmc, &grid, &v0, c * r, gamma, &kernel, &g, false).map_err(|e| e.to_string())?);
        start += count;
    }
    // reference lognormal multiplier M = c^{gamma^2 q / 2} e^{gamma N_c}
    let sd = (-c.ln()).sqrt();
    let pref = c.powf(gamma * gamma * q / 2.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x676f_6c64);
    let m: Vec<f64> = (0..n)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            pref * (gamma * sd * z).exp()
        })
        .collect();
    let problem = GoldieProblem {
        u_samples: u,
        v_samples: v,
        m_samples: m.clone(),
        q,
    };
    let est = goldie_constant(&problem).map_err(|e| e.to_string())?;
    let report = goldie_condition_report(&m, q).map_err(|e| e.to_string())?;
    let m_q_log_m_target = -(gamma * gamma / 2.0) * q * c.ln();
    let row = vec![
        fmt(est.constant.value),
        fmt(est.constant.se),
        fmt(est.m_q.value),
        fmt(est.m_q.se),
        fmt(est.m_q_log_m.value),
        fmt(est.m_q_log_m.se),
        report.arithmetic_suspect.to_string(),
    ];
    let mut summary = Map::new();
    summary.insert("goldie_constant".into(), json!(est.constant.value));
    summary.insert("goldie_constant_se".into(), json!(est.constant.se));
    summary.insert("m_q".into(), json!(est.m_q.value));
    summary.insert("m_q_se".into(), json!(est.m_q.se));
    summary.insert("m_q_log_m".into(), json!(est.m_q_log_m.value));
    summary.insert("m_q_log_m_se".into(), json!(est.m_q_log_m.se));
    summary.insert("m_q_log_m_target".into(), json!(m_q_log_m_target));
    summary.insert("q".into(), json!(q));
    summary.insert(
        "arithmetic_suspect".into(),
        json!(report.arithmetic_suspect),
    );
    summary.insert("cache_hit".into(), json!(cache_hit));
    Ok(RunOutput {
        table: Table {
            headers: vec![
                "goldie_constant",
                "goldie_constant_se",
                "m_q",
                "m_q_se",
                "m_q_log_m",
                "m_q_log_m_se",
                "arithmetic_suspect",
            ],
            rows: vec![row],
        },
        summary,
    })
}

fn run_tauberian(cfg: &ExperimentConfig) -> Result<RunOutput, String> {
    let t: TauberianBlock = cfg.tauberian.clone().unwrap_or_default();
    let xs = pareto_samples(t.c, t.q, cfg.mc.n, cfg.seed());
    let grid = log_grid(t.lambda_lo, t.lambda_hi, t.lambda_points);
    let laplace = laplace_tail_coefficient(&xs, t.q, &grid).map_err(|e| e.to_string())?;
    let lapco =
        lap_co_asymptote(&xs, t.p, t.q, &grid, Some(t.c)).map_err(|e| e.to_string())?;
    let mut rows = Vec::new();
    for (i, &lam) in grid.iter().enumerate() {
        rows.push(vec![
            fmt(lam),
            fmt(laplace.curve[i]),
            fmt(laplace.point_se[i]),
            fmt(lapco.plateau.curve[i]),
            fmt(lapco.plateau.point_se[i]),
        ]);
    }
    let mut summary = Map::new();
    summary.insert("laplace_level".into(), json!(laplace.level.value));
    summary.insert("laplace_level_se".into(), json!(laplace.level.se));
    summary.insert("laplace_drift".into(), json!(laplace.drift));
    summary.insert("laplace_flat".into(), json!(laplace.flat));
    summary.insert("lapco_level".into(), json!(lapco.plateau.level.value));
    summary.insert("lapco_level_se".into(), json!(lapco.plateau.level.se));
    summary.insert(
        "lapco_reference".into(),
        lapco.reference.map(|v| json!(v)).unwrap_or(Value::Null),
    );
    summary.insert("pareto_c".into(), json!(t.c));
    summary.insert("pareto_q".into(), json!(t.q));
    summary.insert("lapco_p".into(), json!(t.p));
    Ok(RunOutput {
        table: Table {
            headers: vec![
                "lambda",
                "laplace_value",
                "laplace_se",
                "lapco_value",
                "lapco_se",
            ],
            rows,
        },
        summary,
    })
}

fn run_diagnostics(cfg: &ExperimentConfig) -> Result<RunOutput, String> {
    let (kernel, grid) = cfg.build_kernel_grid()?;
    let cov = evaluate_kernel_matrix(&kernel, &grid).map_err(|e| e.to_string())?;
    let (cov_a, cov_b) = shifted_kernel_pair(&cov, 1.0);
    let lines = kahane_convex_order_check(&cov_a, &cov_b, &grid, &kernel, cfg.mc.n, cfg.seed())
        .map_err(|e| e.to_string())?;
    let mut rows = Vec::new();
    let mut all_hold = true;
    for line in &lines {
        all_hold &= line.holds;
        rows.push(vec![
            format!("{:?}", line.f),
            line.f.is_convex().to_string(),
            fmt(line.mean_a.value),
            fmt(line.mean_a.se),
            fmt(line.mean_b.value),
            fmt(line.mean_b.se),
            line.holds.to_string(),
        ]);
    }
    let mut summary = Map::new();
    summary.insert("kahane_all_hold".into(), json!(all_hold));
    summary.insert("kernel_shift".into(), json!(1.0));
    summary.insert("functions_checked".into(), json!(lines.len()));
    Ok(RunOutput {
        table: Table {
            headers: vec![
                "function",
                "convex",
                "mean_a",
                "mean_a_se",
                "mean_b",
                "mean_b_se",
                "holds",
            ],
            rows,
        },
        summary,
    })
}

fn run_moments(cfg: &ExperimentConfig) -> Result<RunOutput, String> {
    let (kernel, grid) = cfg.build_kernel_grid()?;
    let (factor, cache_hit) = cached_factorize(&kernel, &grid, PdPolicy::AutoShift)?;
    let p = cfg.gmc.p.unwrap_or(2.0);
    let masses = chunked_masses(
        &factor,
        &kernel,
        &grid,
        &cfg.region(),
        &cfg.weight(),
        cfg.mc.n,
        cfg.seed(),
    )?;
    let d = cfg.kernel.d;
    let gamma = cfg.gmc.gamma;
    // growth scan across nested sample prefixes exposes infeasible moments
    let mut rows = Vec::new();
    for frac in [100usize, 10, 1] {
        let n_used = (cfg.mc.n / frac).max(2);
        let est = moment_estimate(&masses[..n_used], p, gamma, d, 0.0).map_err(|e| e.to_string())?;
        rows.push(vec![
            n_used.to_string(),
            fmt(est.estimate.value),
            fmt(est.estimate.se),
            est.feasible.to_string(),
        ]);
    }
    let full = moment_estimate(&masses, p, gamma, d, 0.0).map_err(|e| e.to_string())?;
    let mut summary = Map::new();
    summary.insert("moment_p".into(), json!(p));
    summary.insert("moment_estimate".into(), json!(full.estimate.value));
    summary.insert("moment_se".into(), json!(full.estimate.se));
    summary.insert("feasible".into(), json!(full.feasible));
    summary.insert("seiberg_threshold".into(), json!(full.threshold));
    summary.insert("cache_hit".into(), json!(cache_hit));
    Ok(RunOutput {
        table: Table {
            headers: vec!["n_used", "moment_estimate", "moment_se", "feasible"],
            rows,
        },
        summary,
    })
}

/// Write the CSV table and/or JSON summary per the requested formats.
/// Returns the written paths.
pub fn write_outputs(
    kind: ExperimentKind,
    cfg: &ExperimentConfig,
    out: &RunOutput,
    dir: &Path,
    formats: &[String],
) -> Result<Vec<PathBuf>, String> {
    std::fs::create_dir_all(dir).map_err(|e| format!("cannot create {}: {e}", dir.display()))?;
    let hash = cfg.hash(kind);
    let stem = format!("{kind}-{}", &hash[..12]);
    let mut written = Vec::new();
    for f in formats {
        match f.as_str() {
            "csv" => {
                let path = dir.join(format!("{stem}.csv"));
                let mut w = csv::WriterBuilder::new()
                    .terminator(csv::Terminator::Any(b'\n'))
                    .from_path(&path)
                    .map_err(|e| e.to_string())?;
                w.write_record(&out.table.headers).map_err(|e| e.to_string())?;
                for row in &out.table.rows {
                    w.write_record(row).map_err(|e| e.to_string())?;
                }
                w.flush().map_err(|e| e.to_string())?;
                written.push(path);
            }
            "json" => {
                let path = dir.join(format!("{stem}.json"));
                let text = serde_json::to_string_pretty(&Value::Object(out.summary.clone()))
                    .map_err(|e| e.to_string())?;
                std::fs::write(&path, text + "\n").map_err(|e| e.to_string())?;
                written.push(path);
            }
            other => return Err(format!("unknown output format '{other}' (expected csv or json)")),
        }
    }
    Ok(written)
}
