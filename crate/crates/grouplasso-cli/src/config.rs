//! Run configuration files (JSON, unknown keys rejected) for the
//! synthetic experiment and the runtime benchmark, plus the effective-config
//! embedding that makes every results file reproducible from its own first
//! line.

use std::path::Path;

use grouplasso::norms::PNorm;
use grouplasso::projection::ProxTolerances;
use grouplasso::solver::{FitConfig, StepPolicy};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

/// Solver tolerances shared by every fit of a run. The defaults trade the
/// last digits of KKT polish for speed; they are looser than the library
/// defaults, which matter for optimality certificates but not for
/// prediction-error comparisons.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitSettings {
    pub inner_objective_tol: f64,
    pub stationarity_tol: f64,
    pub lambda_tol: f64,
    pub active_norm_tol: f64,
    pub completeness_tol: f64,
    pub max_outer_iterations: usize,
    pub max_inner_iterations: usize,
    pub step: StepPolicy,
    pub projection: ProxTolerances,
    pub max_wall_seconds: Option<f64>,
}

impl Default for FitSettings {
    fn default() -> Self {
        FitSettings {
            inner_objective_tol: 1e-8,
            stationarity_tol: 1e-5,
            lambda_tol: 1e-6,
            active_norm_tol: 1e-10,
            completeness_tol: 1e-6,
            max_outer_iterations: 500,
            max_inner_iterations: 100_000,
            step: StepPolicy::default(),
            projection: ProxTolerances {
                outer_kappa_tol: 1e-7,
                inner_root_tol: 1e-12,
                max_outer_bisections: 200,
                max_inner_iters: 200,
            },
            max_wall_seconds: None,
        }
    }
}

impl FitSettings {
    pub fn to_fit_config(&self, kappa: f64, p: PNorm) -> FitConfig {
        let mut cfg = FitConfig::new(kappa, p);
        cfg.inner_objective_tol = self.inner_objective_tol;
        cfg.stationarity_tol = self.stationarity_tol;
        cfg.lambda_tol = self.lambda_tol;
        cfg.active_norm_tol = self.active_norm_tol;
        cfg.completeness_tol = self.completeness_tol;
        cfg.max_outer_iterations = self.max_outer_iterations;
        cfg.max_inner_iterations = self.max_inner_iterations;
        cfg.step = self.step;
        cfg.projection = self.projection;
        cfg.max_wall_seconds = self.max_wall_seconds;
        cfg
    }
}

/// A method column of the study.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Method {
    Pooled,
    SingleTaskL1,
    GroupLasso(PNorm),
}

impl Method {
    pub fn id(&self) -> String {
        match self {
            Method::Pooled => "pooled".into(),
            Method::SingleTaskL1 => "single_l1".into(),
            Method::GroupLasso(_) => "group_lasso".into(),
        }
    }

    /// The p column value; empty for the baselines.
    pub fn p_label(&self) -> String {
        match self {
            Method::GroupLasso(p) => p.to_string(),
            _ => String::new(),
        }
    }

    pub fn parse(s: &str) -> CliResult<Method> {
        match s {
            "pooled" => Ok(Method::Pooled),
            "single_l1" => Ok(Method::SingleTaskL1),
            other => {
                if let Some(p) = other.strip_prefix("gl:") {
                    let p: PNorm = p
                        .parse()
                        .map_err(|e| CliError::usage(format!("bad method {other:?}: {e}")))?;
                    Ok(Method::GroupLasso(p))
                } else {
                    Err(CliError::usage(format!(
                        "unknown method {other:?}; use pooled, single_l1 or gl:<p>"
                    )))
                }
            }
        }
    }

    pub fn spec_string(&self) -> String {
        match self {
            Method::Pooled => "pooled".into(),
            Method::SingleTaskL1 => "single_l1".into(),
            Method::GroupLasso(p) => format!("gl:{p}"),
        }
    }
}

impl Serialize for Method {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.spec_string())
    }
}

impl<'de> Deserialize<'de> for Method {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Method::parse(&s).map_err(serde::de::Error::custom)
    }
}

fn default_seeds() -> Vec<u64> {
    (0..20).collect()
}
fn default_share_fracs() -> Vec<f64> {
    vec![1.0, 0.75, 0.5, 0.3]
}
fn default_dim() -> usize {
    100
}
fn default_tasks() -> usize {
    10
}
fn default_examples() -> usize {
    100
}
fn default_relevant_frac() -> f64 {
    0.02
}
fn default_test_frac() -> f64 {
    1.0 / 3.0
}
fn default_validation_frac() -> f64 {
    0.25
}
fn default_kappa_grid() -> Vec<f64> {
    vec![16.0, 8.0, 4.0, 2.0, 1.0]
}
fn default_methods() -> Vec<Method> {
    vec![
        Method::Pooled,
        Method::SingleTaskL1,
        Method::GroupLasso(PNorm::one()),
        Method::GroupLasso(PNorm::new(1.5).expect("valid")),
        Method::GroupLasso(PNorm::two()),
        Method::GroupLasso(PNorm::new(3.0).expect("valid")),
        Method::GroupLasso(PNorm::inf()),
    ]
}

/// Configuration of the synthetic shared-sparsity study.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seeds: Vec<u64>,
    pub share_fracs: Vec<f64>,
    pub dim: usize,
    pub tasks: usize,
    pub examples_per_task: usize,
    pub relevant_frac: f64,
    pub test_frac: f64,
    /// Share of the training examples held out (per task, by index) to pick
    /// kappa.
    pub validation_frac: f64,
    /// Descending kappa grid searched per method.
    pub kappa_grid: Vec<f64>,
    pub methods: Vec<Method>,
    pub fit: FitSettings,
    /// Optional directory receiving the generated data sets as CSV.
    pub dataset_dir: Option<String>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seeds: default_seeds(),
            share_fracs: default_share_fracs(),
            dim: default_dim(),
            tasks: default_tasks(),
            examples_per_task: default_examples(),
            relevant_frac: default_relevant_frac(),
            test_frac: default_test_frac(),
            validation_frac: default_validation_frac(),
            kappa_grid: default_kappa_grid(),
            methods: default_methods(),
            fit: FitSettings::default(),
            dataset_dir: None,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> CliResult<()> {
        if self.seeds.is_empty() || self.share_fracs.is_empty() || self.methods.is_empty() {
            return Err(CliError::usage("seeds, share_fracs and methods must be non-empty"));
        }
        if self.kappa_grid.is_empty() {
            return Err(CliError::usage("kappa_grid must be non-empty"));
        }
        if self.kappa_grid.windows(2).any(|w| w[1] >= w[0]) {
            return Err(CliError::usage("kappa_grid must be strictly decreasing"));
        }
        if self.kappa_grid.iter().any(|&k| !(k > 0.0)) {
            return Err(CliError::usage("kappa_grid entries must be positive"));
        }
        if !(self.validation_frac > 0.0 && self.validation_frac < 1.0) {
            return Err(CliError::usage("validation_frac must lie in (0, 1)"));
        }
        Ok(())
    }
}

fn default_group_counts() -> Vec<usize> {
    vec![100, 500, 1000, 2000]
}
fn default_bench_tasks() -> usize {
    3
}
fn default_bench_examples() -> usize {
    120
}
fn default_relevant_groups() -> usize {
    10
}
fn default_bench_p() -> Vec<PNorm> {
    vec![PNorm::two()]
}
fn default_bench_kappa() -> f64 {
    4.0
}
fn default_repetitions() -> usize {
    5
}
fn default_timeout() -> f64 {
    600.0
}
fn default_baseline_tol() -> f64 {
    1e-8
}

/// Configuration of the active-set vs full-set runtime comparison.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    pub seed: u64,
    /// Group counts J; the feature dimension equals J.
    pub group_counts: Vec<usize>,
    pub tasks: usize,
    pub examples_per_task: usize,
    /// Planted relevant group count, fixed across J.
    pub relevant_groups: usize,
    pub p_values: Vec<PNorm>,
    pub kappa: f64,
    /// Runs per cell; the median is reported.
    pub repetitions: usize,
    /// Per-run wall-clock budget in seconds; exceeded runs are recorded as
    /// timeouts and the benchmark continues.
    pub timeout_seconds: f64,
    /// Objective-decrease tolerance of the full-set baseline (the active
    /// set solver uses `fit.inner_objective_tol`, which should match).
    pub baseline_tol: f64,
    pub fit: FitSettings,
}

impl Default for BenchConfig {
    fn default() -> Self {
        let mut fit = FitSettings::default();
        fit.inner_objective_tol = default_baseline_tol();
        BenchConfig {
            seed: 0,
            group_counts: default_group_counts(),
            tasks: default_bench_tasks(),
            examples_per_task: default_bench_examples(),
            relevant_groups: default_relevant_groups(),
            p_values: default_bench_p(),
            kappa: default_bench_kappa(),
            repetitions: default_repetitions(),
            timeout_seconds: default_timeout(),
            baseline_tol: default_baseline_tol(),
            fit,
        }
    }
}

impl BenchConfig {
    pub fn validate(&self) -> CliResult<()> {
        if self.group_counts.is_empty() || self.p_values.is_empty() {
            return Err(CliError::usage("group_counts and p_values must be non-empty"));
        }
        if self.relevant_groups == 0 || self.group_counts.iter().any(|&j| j < self.relevant_groups)
        {
            return Err(CliError::usage(
                "every group count must be at least the planted relevant_groups",
            ));
        }
        if self.repetitions == 0 {
            return Err(CliError::usage("repetitions must be at least 1"));
        }
        if !(self.kappa > 0.0) {
            return Err(CliError::usage("kappa must be positive"));
        }
        Ok(())
    }
}

/// Loads a JSON config. A results CSV produced by this tool is also
/// accepted: its first line carries the effective config as `# {json}`.
pub fn load_config<T: for<'de> Deserialize<'de>>(path: &Path) -> CliResult<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::io(path.display().to_string(), e))?;
    let body = if let Some(first) = text.lines().next() {
        if let Some(stripped) = first.strip_prefix("# ") {
            stripped.to_string()
        } else {
            text
        }
    } else {
        text
    };
    serde_json::from_str(&body)
        .map_err(|e| CliError::parse(path.display().to_string(), e.to_string()))
}

/// Canonical serialization of the effective config; hashed into every
/// results row and embedded as the first line of results files.
pub fn canonical_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string(value).expect("config serialization cannot fail")
}

pub fn config_hash(canonical: &str) -> String {
    let digest = Sha256::digest(canonical.as_bytes());
    let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
    hex[..12].to_string()
}
