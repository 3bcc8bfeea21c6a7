//! The synthetic shared-sparsity study: for every (share fraction, seed)
//! cell, each method searches a descending kappa grid on a validation slice
//! of the training data, refits the winner on the full training set and is
//! scored on the held-out test set. Results come out as a long-format CSV
//! (one row per method/kappa/seed), a median/IQR summary per cell, and a
//! timing sidecar. Row order and float formatting are deterministic, so a
//! rerun with the same config is byte-identical; wall-clock numbers live in
//! the sidecar only.

use std::path::Path;
use std::time::Instant;

use grouplasso::multitask::{
    build_multitask_problem, evaluate_error, generate_synthetic, pooled_design,
    single_task_design, split_tasks, unstack_coefficients, SynthSpec, TaskCollection,
};
use grouplasso::norms::PNorm;
use grouplasso::solver::{fit_active_set, regularization_path, FitResult};
use grouplasso::GlmFamily;
use ndarray::Array2;
use rayon::prelude::*;

use crate::config::{canonical_json, config_hash, ExperimentConfig, FitSettings, Method};
use crate::error::{CliError, CliResult};
use crate::io::write_tasks;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Role {
    Search,
    Final,
}

impl Role {
    fn label(&self) -> &'static str {
        match self {
            Role::Search => "search",
            Role::Final => "final",
        }
    }
}

/// One row of the long-format results table.
#[derive(Clone, Debug)]
pub struct ResultRow {
    pub share_frac: f64,
    pub seed: u64,
    pub method: Method,
    pub kappa: f64,
    pub role: Role,
    pub selected: bool,
    pub val_error: Option<f64>,
    pub test_error: Option<f64>,
    pub per_task_errors: Vec<f64>,
    pub lambda: Option<f64>,
    pub active_groups: Option<usize>,
    pub complete: Option<bool>,
    pub unique_certified: Option<bool>,
    pub constraint_active: Option<bool>,
    pub outer_iterations: usize,
    pub inner_iterations: usize,
    pub error: Option<String>,
}

#[derive(Clone, Debug)]
pub struct SummaryRow {
    pub share_frac: f64,
    pub method: Method,
    pub seeds_used: usize,
    pub median_test_error: f64,
    pub q1: f64,
    pub q3: f64,
}

#[derive(Clone, Debug)]
pub struct TimingRow {
    pub share_frac: f64,
    pub seed: u64,
    pub method: Method,
    pub wall_ms: f64,
}

pub struct ExperimentOutput {
    pub rows: Vec<ResultRow>,
    pub summary: Vec<SummaryRow>,
    pub timing: Vec<TimingRow>,
}

/// Aggregate statistics of one fit (or one per-task family of fits).
#[derive(Clone)]
struct FitStats {
    lambda: f64,
    active_groups: usize,
    complete: bool,
    unique_certified: bool,
    constraint_active: bool,
    outer: usize,
    inner: usize,
}

impl FitStats {
    fn from_fit(fit: &FitResult) -> Self {
        FitStats {
            lambda: fit.lambda,
            active_groups: fit.active_set.len(),
            complete: fit.complete,
            unique_certified: fit.unique_certified,
            constraint_active: fit.constraint_active,
            outer: fit.outer_iterations,
            inner: fit.inner_iteration_total,
        }
    }

    fn merge(stats: &[FitStats]) -> Self {
        FitStats {
            lambda: stats.iter().map(|s| s.lambda).fold(0.0, f64::max),
            active_groups: stats.iter().map(|s| s.active_groups).sum(),
            complete: stats.iter().all(|s| s.complete),
            unique_certified: stats.iter().all(|s| s.unique_certified),
            constraint_active: stats.iter().all(|s| s.constraint_active),
            outer: stats.iter().map(|s| s.outer).sum(),
            inner: stats.iter().map(|s| s.inner).sum(),
        }
    }
}

type PathPoint = Result<(Array2<f64>, FitStats), String>;

/// Fits a method along the kappa grid on `train`, returning a d x m
/// estimate per grid point.
fn method_path(
    method: Method,
    train: &TaskCollection,
    grid: &[f64],
    settings: &FitSettings,
) -> Vec<PathPoint> {
    let d = train.dim();
    let m = train.num_tasks();
    match method {
        Method::GroupLasso(p) => {
            let design = match build_multitask_problem(train) {
                Ok(d) => d,
                Err(e) => return vec![Err(e.to_string()); grid.len()],
            };
            let cfg = settings.to_fit_config(1.0, p);
            match regularization_path(GlmFamily::Bernoulli, &design, grid, &cfg) {
                Ok(fits) => fits
                    .into_iter()
                    .map(|fit| {
                        fit.map_err(|e| e.to_string()).and_then(|f| {
                            let b = unstack_coefficients(&f.beta, d, m)
                                .map_err(|e| e.to_string())?;
                            Ok((b, FitStats::from_fit(&f)))
                        })
                    })
                    .collect(),
                Err(e) => vec![Err(e.to_string()); grid.len()],
            }
        }
        Method::Pooled => {
            let design = match pooled_design(train) {
                Ok(d) => d,
                Err(e) => return vec![Err(e.to_string()); grid.len()],
            };
            let cfg = settings.to_fit_config(1.0, PNorm::one());
            match regularization_path(GlmFamily::Bernoulli, &design, grid, &cfg) {
                Ok(fits) => fits
                    .into_iter()
                    .map(|fit| {
                        fit.map_err(|e| e.to_string()).map(|f| {
                            let mut b = Array2::zeros((d, m));
                            for k in 0..m {
                                for j in 0..d {
                                    b[[j, k]] = f.beta.values()[j];
                                }
                            }
                            (b, FitStats::from_fit(&f))
                        })
                    })
                    .collect(),
                Err(e) => vec![Err(e.to_string()); grid.len()],
            }
        }
        Method::SingleTaskL1 => {
            // per-task paths combined column by column
            let cfg = settings.to_fit_config(1.0, PNorm::one());
            let mut per_task: Vec<Vec<Result<(Vec<f64>, FitStats), String>>> = Vec::new();
            for task in train.tasks() {
                let design = match single_task_design(task) {
                    Ok(d) => d,
                    Err(e) => {
                        per_task.push(vec![Err(e.to_string()); grid.len()]);
                        continue;
                    }
                };
                match regularization_path(GlmFamily::Bernoulli, &design, grid, &cfg) {
                    Ok(fits) => per_task.push(
                        fits.into_iter()
                            .map(|fit| {
                                fit.map_err(|e| e.to_string()).map(|f| {
                                    let stats = FitStats::from_fit(&f);
                                    (f.beta.into_values().to_vec(), stats)
                                })
                            })
                            .collect(),
                    ),
                    Err(e) => per_task.push(vec![Err(e.to_string()); grid.len()]),
                }
            }
            (0..grid.len())
                .map(|gi| {
                    let mut b = Array2::zeros((d, m));
                    let mut stats = Vec::with_capacity(m);
                    for (k, task_points) in per_task.iter().enumerate() {
                        match &task_points[gi] {
                            Ok((col, st)) => {
                                for j in 0..d {
                                    b[[j, k]] = col[j];
                                }
                                stats.push(FitStats {
                                    lambda: st.lambda,
                                    active_groups: st.active_groups,
                                    complete: st.complete,
                                    unique_certified: st.unique_certified,
                                    constraint_active: st.constraint_active,
                                    outer: st.outer,
                                    inner: st.inner,
                                });
                            }
                            Err(e) => return Err(format!("task {k}: {e}")),
                        }
                    }
                    Ok((b, FitStats::merge(&stats)))
                })
                .collect()
        }
    }
}

/// Cold refit of a method at one kappa on the full training data.
fn method_fit(
    method: Method,
    train: &TaskCollection,
    kappa: f64,
    settings: &FitSettings,
) -> Result<(Array2<f64>, FitStats), String> {
    let points = method_path_single(method, train, kappa, settings)?;
    Ok(points)
}

fn method_path_single(
    method: Method,
    train: &TaskCollection,
    kappa: f64,
    settings: &FitSettings,
) -> Result<(Array2<f64>, FitStats), String> {
    let d = train.dim();
    let m = train.num_tasks();
    match method {
        Method::GroupLasso(p) => {
            let design = build_multitask_problem(train).map_err(|e| e.to_string())?;
            let cfg = settings.to_fit_config(kappa, p);
            let fit = fit_active_set(GlmFamily::Bernoulli, &design, &cfg)
                .map_err(|e| e.to_string())?;
            let b = unstack_coefficients(&fit.beta, d, m).map_err(|e| e.to_string())?;
            Ok((b, FitStats::from_fit(&fit)))
        }
        Method::Pooled => {
            let design = pooled_design(train).map_err(|e| e.to_string())?;
            let cfg = settings.to_fit_config(kappa, PNorm::one());
            let fit = fit_active_set(GlmFamily::Bernoulli, &design, &cfg)
                .map_err(|e| e.to_string())?;
            let mut b = Array2::zeros((d, m));
            for k in 0..m {
                for j in 0..d {
                    b[[j, k]] = fit.beta.values()[j];
                }
            }
            Ok((b, FitStats::from_fit(&fit)))
        }
        Method::SingleTaskL1 => {
            let cfg = settings.to_fit_config(kappa, PNorm::one());
            let mut b = Array2::zeros((d, m));
            let mut stats = Vec::with_capacity(m);
            for (k, task) in train.tasks().iter().enumerate() {
                let design = single_task_design(task).map_err(|e| e.to_string())?;
                let fit = fit_active_set(GlmFamily::Bernoulli, &design, &cfg)
                    .map_err(|e| format!("task {k}: {e}"))?;
                for j in 0..d {
                    b[[j, k]] = fit.beta.values()[j];
                }
                stats.push(FitStats::from_fit(&fit));
            }
            Ok((b, FitStats::merge(&stats)))
        }
    }
}

fn error_row(
    share: f64,
    seed: u64,
    method: Method,
    kappa: f64,
    role: Role,
    message: String,
) -> ResultRow {
    ResultRow {
        share_frac: share,
        seed,
        method,
        kappa,
        role,
        selected: false,
        val_error: None,
        test_error: None,
        per_task_errors: Vec::new(),
        lambda: None,
        active_groups: None,
        complete: None,
        unique_certified: None,
        constraint_active: None,
        outer_iterations: 0,
        inner_iterations: 0,
        error: Some(message),
    }
}

/// Runs one (share, seed) cell across all methods.
fn run_cell(
    config: &ExperimentConfig,
    share: f64,
    seed: u64,
) -> CliResult<(Vec<ResultRow>, Vec<TimingRow>)> {
    let spec = SynthSpec {
        seed,
        dim: config.dim,
        tasks: config.tasks,
        examples_per_task: config.examples_per_task,
        relevant_frac: config.relevant_frac,
        share_frac: share,
        test_frac: config.test_frac,
    };
    let (train, test, _truth) =
        generate_synthetic(&spec).map_err(|e| CliError::usage(e.to_string()))?;
    if let Some(dir) = &config.dataset_dir {
        let dir = Path::new(dir);
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::io(dir.display().to_string(), e))?;
        write_tasks(&dir.join(format!("share{share}_seed{seed}_train.csv")), &train)?;
        write_tasks(&dir.join(format!("share{share}_seed{seed}_test.csv")), &test)?;
    }
    let (subtrain, validation) =
        split_tasks(&train, config.validation_frac).map_err(|e| CliError::usage(e.to_string()))?;

    let mut rows = Vec::new();
    let mut timing = Vec::new();
    for &method in &config.methods {
        let start = Instant::now();
        let points = method_path(method, &subtrain, &config.kappa_grid, &config.fit);
        let mut best: Option<(usize, f64)> = None;
        for (gi, point) in points.iter().enumerate() {
            let kappa = config.kappa_grid[gi];
            match point {
                Ok((b, stats)) => {
                    let (_, val_err) = evaluate_error(b, &validation)
                        .map_err(|e| CliError::usage(e.to_string()))?;
                    if best.map_or(true, |(_, e)| val_err < e) {
                        best = Some((gi, val_err));
                    }
                    rows.push(ResultRow {
                        share_frac: share,
                        seed,
                        method,
                        kappa,
                        role: Role::Search,
                        selected: false,
                        val_error: Some(val_err),
                        test_error: None,
                        per_task_errors: Vec::new(),
                        lambda: Some(stats.lambda),
                        active_groups: Some(stats.active_groups),
                        complete: Some(stats.complete),
                        unique_certified: Some(stats.unique_certified),
                        constraint_active: Some(stats.constraint_active),
                        outer_iterations: stats.outer,
                        inner_iterations: stats.inner,
                        error: None,
                    });
                }
                Err(e) => {
                    rows.push(error_row(share, seed, method, kappa, Role::Search, e.clone()));
                }
            }
        }
        match best {
            Some((gi, val_err)) => {
                let kappa = config.kappa_grid[gi];
                match method_fit(method, &train, kappa, &config.fit) {
                    Ok((b, stats)) => {
                        let (per_task, mean) = evaluate_error(&b, &test)
                            .map_err(|e| CliError::usage(e.to_string()))?;
                        // mark the selected search row
                        if let Some(row) = rows.iter_mut().find(|r| {
                            r.seed == seed
                                && r.method == method
                                && r.role == Role::Search
                                && r.kappa == kappa
                                && r.share_frac == share
                        }) {
                            row.selected = true;
                        }
                        rows.push(ResultRow {
                            share_frac: share,
                            seed,
                            method,
                            kappa,
                            role: Role::Final,
                            selected: true,
                            val_error: Some(val_err),
                            test_error: Some(mean),
                            per_task_errors: per_task,
                            lambda: Some(stats.lambda),
                            active_groups: Some(stats.active_groups),
                            complete: Some(stats.complete),
                            unique_certified: Some(stats.unique_certified),
                            constraint_active: Some(stats.constraint_active),
                            outer_iterations: stats.outer,
                            inner_iterations: stats.inner,
                            error: None,
                        });
                    }
                    Err(e) => {
                        rows.push(error_row(share, seed, method, kappa, Role::Final, e));
                    }
                }
            }
            None => {
                rows.push(error_row(
                    share,
                    seed,
                    method,
                    f64::NAN,
                    Role::Final,
                    "no grid point converged".into(),
                ));
            }
        }
        timing.push(TimingRow {
            share_frac: share,
            seed,
            method,
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
        });
    }
    Ok((rows, timing))
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        let frac = pos - lo as f64;
        sorted[lo] * (1.0 - frac) + sorted[hi] * frac
    }
}

pub fn median(values: &[f64]) -> f64 {
    let mut v: Vec<f64> = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    quantile(&v, 0.5)
}

/// Runs the whole study; cells fan out across the rayon pool and rows come
/// back in configuration order.
pub fn run_experiment(
    config: &ExperimentConfig,
    jobs: Option<usize>,
) -> CliResult<ExperimentOutput> {
    config.validate()?;
    let cells: Vec<(usize, usize)> = (0..config.share_fracs.len())
        .flat_map(|si| (0..config.seeds.len()).map(move |ri| (si, ri)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| CliError::usage(e.to_string()))?;
    let mut cell_results: Vec<((usize, usize), CliResult<(Vec<ResultRow>, Vec<TimingRow>)>)> =
        pool.install(|| {
            cells
                .par_iter()
                .map(|&(si, ri)| {
                    let share = config.share_fracs[si];
                    let seed = config.seeds[ri];
                    ((si, ri), run_cell(config, share, seed))
                })
                .collect()
        });
    cell_results.sort_by_key(|(key, _)| *key);

    let mut rows = Vec::new();
    let mut timing = Vec::new();
    for (_, result) in cell_results {
        let (mut r, mut t) = result?;
        rows.append(&mut r);
        timing.append(&mut t);
    }

    // summary: per (share, method) median and IQR of the final test errors
    let mut summary = Vec::new();
    for &share in &config.share_fracs {
        for &method in &config.methods {
            let mut errs: Vec<f64> = rows
                .iter()
                .filter(|r| {
                    r.share_frac == share
                        && r.method == method
                        && r.role == Role::Final
                        && r.error.is_none()
                })
                .filter_map(|r| r.test_error)
                .collect();
            errs.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
            summary.push(SummaryRow {
                share_frac: share,
                method,
                seeds_used: errs.len(),
                median_test_error: quantile(&errs, 0.5),
                q1: quantile(&errs, 0.25),
                q3: quantile(&errs, 0.75),
            });
        }
    }
    Ok(ExperimentOutput { rows, summary, timing })
}

fn fmt_opt_f64(v: Option<f64>) -> String {
    v.map(|x| format!("{x}")).unwrap_or_default()
}

fn fmt_opt<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn results_csv(config: &ExperimentConfig, out: &ExperimentOutput) -> String {
    let canonical = canonical_json(config);
    let hash = config_hash(&canonical);
    let mut s = format!("# {canonical}\n");
    s.push_str(
        "config_hash,share_frac,seed,method,p,kappa,role,selected,val_error,test_error,\
         per_task_errors,lambda,active_groups,complete,unique_certified,constraint_active,\
         outer_iterations,inner_iterations,error\n",
    );
    for r in &out.rows {
        let per_task = r
            .per_task_errors
            .iter()
            .map(|e| format!("{e}"))
            .collect::<Vec<_>>()
            .join(";");
        s.push_str(&format!(
            "{hash},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            r.share_frac,
            r.seed,
            r.method.id(),
            r.method.p_label(),
            r.kappa,
            r.role.label(),
            r.selected,
            fmt_opt_f64(r.val_error),
            fmt_opt_f64(r.test_error),
            per_task,
            fmt_opt_f64(r.lambda),
            fmt_opt(r.active_groups),
            fmt_opt(r.complete),
            fmt_opt(r.unique_certified),
            fmt_opt(r.constraint_active),
            r.outer_iterations,
            r.inner_iterations,
            r.error.clone().unwrap_or_default().replace(',', ";"),
        ));
    }
    s
}

pub fn summary_csv(config: &ExperimentConfig, out: &ExperimentOutput) -> String {
    let canonical = canonical_json(config);
    let hash = config_hash(&canonical);
    let mut s = format!("# {canonical}\n");
    s.push_str("config_hash,share_frac,method,p,seeds_used,median_test_error,q1,q3\n");
    for r in &out.summary {
        s.push_str(&format!(
            "{hash},{},{},{},{},{},{},{}\n",
            r.share_frac,
            r.method.id(),
            r.method.p_label(),
            r.seeds_used,
            r.median_test_error,
            r.q1,
            r.q3,
        ));
    }
    s
}

pub fn timing_csv(out: &ExperimentOutput) -> String {
    let mut s = String::from("share_frac,seed,method,p,wall_ms\n");
    for t in &out.timing {
        s.push_str(&format!(
            "{},{},{},{},{}\n",
            t.share_frac,
            t.seed,
            t.method.id(),
            t.method.p_label(),
            t.wall_ms
        ));
    }
    s
}

/// Writes results, summary and timing files next to `output`.
pub fn write_experiment_files(
    config: &ExperimentConfig,
    out: &ExperimentOutput,
    output: &Path,
) -> CliResult<()> {
    crate::io::write_output(output, &results_csv(config, out))?;
    let stem = output.with_extension("");
    let summary_path = format!("{}_summary.csv", stem.display());
    let timing_path = format!("{}_timing.csv", stem.display());
    crate::io::write_output(Path::new(&summary_path), &summary_csv(config, out))?;
    crate::io::write_output(Path::new(&timing_path), &timing_csv(out))?;
    Ok(())
}
