//! Experiment configuration: TOML parsing, validation, normalization, and
//! the config hash that keys result files and the factor cache.

use gmc_core::field::{DomainSpec, FSpec, Grid, KernelSpec};
use gmc_core::measure::{RegionMask, WeightFunction};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fmt;
use std::path::Path;

/// The eight experiment kinds the runner knows how to dispatch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Tail,
    Reflection,
    ReflectionAlpha,
    Scaling,
    Goldie,
    Tauberian,
    Diagnostics,
    Moments,
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ExperimentKind::Tail => "tail",
            ExperimentKind::Reflection => "reflection",
            ExperimentKind::ReflectionAlpha => "reflection-alpha",
            ExperimentKind::Scaling => "scaling",
            ExperimentKind::Goldie => "goldie",
            ExperimentKind::Tauberian => "tauberian",
            ExperimentKind::Diagnostics => "diagnostics",
            ExperimentKind::Moments => "moments",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FBlock {
    Zero,
    Constant { value: f64 },
    Cosine,
    GaussianBump,
    /// Path to a whitespace-separated symmetric matrix over the grid.
    Tabulated { path: String },
}

impl Default for FBlock {
    fn default() -> Self {
        FBlock::Zero
    }
}

/// Truncation scale: a refinement policy tied to the grid spacing, or an
/// explicit value.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EpsSpec {
    Policy(EpsPolicy),
    Value(f64),
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub enum EpsPolicy {
    #[serde(rename = "h")]
    H,
    #[serde(rename = "h/2")]
    HalfH,
    #[serde(rename = "h/4")]
    QuarterH,
}

impl Default for EpsSpec {
    fn default() -> Self {
        EpsSpec::Policy(EpsPolicy::H)
    }
}

impl EpsSpec {
    pub fn resolve(&self, spacing: f64) -> f64 {
        match self {
            EpsSpec::Policy(EpsPolicy::H) => spacing,
            EpsSpec::Policy(EpsPolicy::HalfH) => spacing / 2.0,
            EpsSpec::Policy(EpsPolicy::QuarterH) => spacing / 4.0,
            EpsSpec::Value(v) => *v,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelBlock {
    pub d: usize,
    /// Box domain bounds per axis; defaults to the unit box.
    pub domain: Option<Vec<(f64, f64)>>,
    #[serde(default)]
    pub f: FBlock,
    #[serde(default)]
    pub epsilon: EpsSpec,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridBlock {
    pub points_per_axis: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum GBlock {
    One,
    Constant { value: f64 },
}

impl Default for GBlock {
    fn default() -> Self {
        GBlock::One
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum RegionBlock {
    All,
    Box { bounds: Vec<(f64, f64)> },
    Ball { center: Vec<f64>, radius: f64 },
}

impl Default for RegionBlock {
    fn default() -> Self {
        RegionBlock::All
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GmcBlock {
    pub gamma: f64,
    #[serde(default)]
    pub g: GBlock,
    #[serde(default)]
    pub region: RegionBlock,
    /// Root point v for rooted/singular experiments.
    pub root: Option<Vec<f64>>,
    /// Ball radius r.
    pub radius: Option<f64>,
    /// Scaling factor c in (0, 1).
    pub c: Option<f64>,
    /// Singular exponent alpha for reflection-alpha.
    pub alpha: Option<f64>,
    /// Moment order p for the moments experiment.
    pub p: Option<f64>,
    /// Epsilon-refinement levels for the reflection sweep.
    pub levels: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McBlock {
    pub n: usize,
    pub seed: Option<u64>,
    /// Worker-count hint; results never depend on it.
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    pub directory: Option<String>,
    pub formats: Option<Vec<String>>,
}

/// Extra knobs for the tauberian experiment (analytic Pareto inputs).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TauberianBlock {
    #[serde(default = "one")]
    pub c: f64,
    #[serde(default = "two")]
    pub q: f64,
    #[serde(default = "one")]
    pub p: f64,
    #[serde(default = "one")]
    pub lambda_lo: f64,
    #[serde(default = "hundred")]
    pub lambda_hi: f64,
    #[serde(default = "sixteen")]
    pub lambda_points: usize,
}

fn one() -> f64 {
    1.0
}
fn two() -> f64 {
    2.0
}
fn hundred() -> f64 {
    100.0
}
fn sixteen() -> usize {
    16
}

impl Default for TauberianBlock {
    fn default() -> Self {
        TauberianBlock {
            c: 1.0,
            q: 2.0,
            p: 1.0,
            lambda_lo: 1.0,
            lambda_hi: 100.0,
            lambda_points: 16,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kernel: KernelBlock,
    pub grid: GridBlock,
    pub gmc: GmcBlock,
    pub mc: McBlock,
    #[serde(default)]
    pub output: OutputBlock,
    #[serde(default)]
    pub tauberian: Option<TauberianBlock>,
}

/// A validation failure with the path of the offending field.
#[derive(Debug)]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

impl ExperimentConfig {
    /// Parse, validate, and normalize a config for the given experiment.
    /// Normalization fills defaults (a missing seed becomes 0) so the echoed
    /// config and its hash are complete.
    pub fn from_toml(text: &str, kind: ExperimentKind) -> Result<Self, Vec<ConfigError>> {
        let mut cfg: ExperimentConfig = toml::from_str(text).map_err(|e| {
            vec![ConfigError {
                field: "<config>".into(),
                message: e.to_string(),
            }]
        })?;
        cfg.normalize();
        cfg.validate(kind).map(|()| cfg)
    }

    fn normalize(&mut self) {
        if self.mc.seed.is_none() {
            self.mc.seed = Some(0);
        }
        if self.mc.workers.is_none() {
            self.mc.workers = Some(1);
        }
        if self.kernel.domain.is_none() {
            self.kernel.domain = Some(vec![(0.0, 1.0); self.kernel.d]);
        }
        if self.output.formats.is_none() {
            self.output.formats = Some(vec!["csv".into(), "json".into()]);
        }
        if self.output.directory.is_none() {
            self.output.directory = Some("gmc-out".into());
        }
    }

    fn validate(&self, kind: ExperimentKind) -> Result<(), Vec<ConfigError>> {
        let mut errs = Vec::new();
        let d = self.kernel.d;
        if !(1..=3).contains(&d) {
            errs.push(ConfigError {
                field: "kernel.d".into(),
                message: "dimension must be 1, 2, or 3".into(),
            });
        }
        let gamma = self.gmc.gamma;
        let crit = (2.0 * d as f64).sqrt();
        if !(gamma > 0.0 && gamma < crit) {
            errs.push(ConfigError {
                field: "gmc.gamma".into(),
                message: format!(
                    "supercritical/critical gamma: the subcritical theory needs gamma in (0, sqrt(2d)) = (0, {crit:.4}), got {gamma}"
                ),
            });
        }
        if let Some(dom) = &self.kernel.domain {
            if dom.len() != d {
                errs.push(ConfigError {
                    field: "kernel.domain".into(),
                    message: format!("expected {d} axis bounds, got {}", dom.len()),
                });
            }
            for (i, (lo, hi)) in dom.iter().enumerate() {
                if !(hi > lo) {
                    errs.push(ConfigError {
                        field: format!("kernel.domain[{i}]"),
                        message: "bounds must satisfy lo < hi".into(),
                    });
                }
            }
        }
        if self.grid.points_per_axis < 2 {
            errs.push(ConfigError {
                field: "grid.points_per_axis".into(),
                message: "need at least 2 points per axis".into(),
            });
        }
        if self.mc.n < 1 {
            errs.push(ConfigError {
                field: "mc.n".into(),
                message: "replicate count must be >= 1".into(),
            });
        }
        if let Some(c) = self.gmc.c {
            if !(c > 0.0 && c < 1.0) {
                errs.push(ConfigError {
                    field: "gmc.c".into(),
                    message: format!("scaling factor must lie in (0, 1), got {c}"),
                });
            }
        }
        if let GBlock::Constant { value } = self.gmc.g {
            if !(value >= 0.0) {
                errs.push(ConfigError {
                    field: "gmc.g.value".into(),
                    message: "weight function must be nonnegative".into(),
                });
            }
        }
        let q_big = gamma / 2.0 + d as f64 / gamma;
        if let Some(alpha) = self.gmc.alpha {
            if !(alpha > gamma / 2.0 && alpha < q_big) {
                errs.push(ConfigError {
                    field: "gmc.alpha".into(),
                    message: format!(
                        "alpha must lie in (gamma/2, Q) = ({:.4}, {q_big:.4}), got {alpha}",
                        gamma / 2.0
                    ),
                });
            }
        }
        // per-experiment required fields
        let need = |field: &str, ok: bool, errs: &mut Vec<ConfigError>| {
            if !ok {
                errs.push(ConfigError {
                    field: field.into(),
                    message: format!("required by the {kind} experiment"),
                });
            }
        };
        match kind {
            ExperimentKind::Reflection | ExperimentKind::Goldie => {
                need("gmc.radius", self.gmc.radius.is_some(), &mut errs);
                need("gmc.c", self.gmc.c.is_some(), &mut errs);
            }
            ExperimentKind::ReflectionAlpha => {
                need("gmc.radius", self.gmc.radius.is_some(), &mut errs);
                need("gmc.c", self.gmc.c.is_some(), &mut errs);
                need("gmc.alpha", self.gmc.alpha.is_some(), &mut errs);
            }
            ExperimentKind::Scaling => {
                need("gmc.radius", self.gmc.radius.is_some(), &mut errs);
                need("gmc.c", self.gmc.c.is_some(), &mut errs);
            }
            _ => {}
        }
        if let Some(r) = self.gmc.radius {
            if !(r > 0.0) {
                errs.push(ConfigError {
                    field: "gmc.radius".into(),
                    message: "radius must be positive".into(),
                });
            }
        }
        if let Some(t) = &self.tauberian {
            if !(t.q > 0.0 && t.p > 0.0 && t.c > 0.0) {
                errs.push(ConfigError {
                    field: "tauberian".into(),
                    message: "c, q, p must be positive".into(),
                });
            }
            if !(t.lambda_lo > 0.0 && t.lambda_hi > t.lambda_lo) {
                errs.push(ConfigError {
                    field: "tauberian.lambda_lo".into(),
                    message: "need 0 < lambda_lo < lambda_hi".into(),
                });
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(errs)
        }
    }

    pub fn seed(&self) -> u64 {
        self.mc.seed.unwrap_or(0)
    }

    /// Deterministic hash of the normalized config plus experiment kind.
    /// The output block is excluded: where results go does not change what
    /// they are.
    pub fn hash(&self, kind: ExperimentKind) -> String {
        let mut hashed = self.clone();
        hashed.output = OutputBlock::default();
        let normalized = toml::to_string(&hashed).expect("normalized config serializes");
        let mut h = Sha256::new();
        h.update(kind.to_string().as_bytes());
        h.update(b"\n");
        h.update(normalized.as_bytes());
        hex::encode(h.finalize())
    }

    /// Build the kernel and working grid described by the config.
    pub fn build_kernel_grid(&self) -> Result<(KernelSpec, Grid), String> {
        let bounds = self.kernel.domain.clone().expect("normalized");
        let domain = DomainSpec::new(bounds).map_err(|e| e.to_string())?;
        let grid = Grid::regular(&domain, &vec![self.grid.points_per_axis; self.kernel.d])
            .map_err(|e| e.to_string())?;
        let f = match &self.kernel.f {
            FBlock::Zero => FSpec::Zero,
            FBlock::Constant { value } => FSpec::Constant(*value),
            FBlock::Cosine => FSpec::Cosine,
            FBlock::GaussianBump => FSpec::GaussianBump,
            FBlock::Tabulated { path } => FSpec::Tabulated(read_matrix(Path::new(path))?),
        };
        let eps = self.kernel.epsilon.resolve(grid.spacing[0]);
        let kernel = KernelSpec::new(domain, f, self.gmc.gamma, eps).map_err(|e| e.to_string())?;
        Ok((kernel, grid))
    }

    pub fn region(&self) -> RegionMask {
        match &self.gmc.region {
            RegionBlock::All => RegionMask::All,
            RegionBlock::Box { bounds } => RegionMask::Box {
                bounds: bounds.clone(),
            },
            RegionBlock::Ball { center, radius } => RegionMask::Ball {
                center: center.clone(),
                radius: *radius,
            },
        }
    }

    pub fn weight(&self) -> WeightFunction {
        match self.gmc.g {
            GBlock::One => WeightFunction::One,
            GBlock::Constant { value } => WeightFunction::Constant(value),
        }
    }
}

/// Read a whitespace-separated numeric matrix (one row per line).
fn read_matrix(path: &Path) -> Result<Vec<Vec<f64>>, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read tabulated f from {}: {e}", path.display()))?;
    let mut rows = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row: Result<Vec<f64>, _> = line.split_whitespace().map(str::parse::<f64>).collect();
        rows.push(row.map_err(|e| format!("{}:{}: {e}", path.display(), ln + 1))?);
    }
    if rows.is_empty() {
        return Err(format!("{}: empty matrix", path.display()));
    }
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(format!("{}: matrix must be square", path.display()));
    }
    Ok(rows)
}
