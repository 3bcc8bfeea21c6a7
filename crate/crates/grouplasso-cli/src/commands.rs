//! The single-shot commands: fit on CSV data and the projection debugger.

use std::path::Path;

use grouplasso::glm::{map_labels_to_unit, Coefficients, GlmFamily, GroupedDesign};
use grouplasso::norms::PNorm;
use grouplasso::projection::project_l1p_ball;
use grouplasso::solver::{fit_active_set, FitResult};
use serde::Serialize;

use crate::config::FitSettings;
use crate::error::{from_solver, CliError, CliResult};
use crate::io;

#[derive(Serialize)]
struct SparseGroup {
    group: usize,
    name: String,
    start: usize,
    values: Vec<f64>,
}

#[derive(Serialize)]
struct FitReport {
    family: GlmFamily,
    p: PNorm,
    kappa: f64,
    lambda: f64,
    objective: f64,
    mixed_norm: f64,
    constraint_active: bool,
    complete: bool,
    unique_certified: bool,
    active_set: Vec<usize>,
    completeness_set: Vec<usize>,
    outer_iterations: usize,
    inner_iteration_total: usize,
    coefficients: Vec<SparseGroup>,
    config: grouplasso::solver::FitConfig,
}

fn sparse_coefficients(fit: &FitResult, names: &[String]) -> Vec<SparseGroup> {
    fit.active_set
        .iter()
        .map(|&j| {
            let range = fit.beta.partition().range(j);
            SparseGroup {
                group: j,
                name: names.get(j).cloned().unwrap_or_else(|| format!("g{j}")),
                start: range.start,
                values: fit.beta.group(j).to_vec(),
            }
        })
        .collect()
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_fit(
    design_path: &Path,
    response_path: &Path,
    groups_path: &Path,
    family: GlmFamily,
    p: PNorm,
    kappa: f64,
    settings: &FitSettings,
    output: &Path,
) -> CliResult<()> {
    let (_, x) = io::read_matrix(design_path)?;
    let y = io::read_vector(response_path)?;
    let (names, partition) = io::read_groups(groups_path, x.ncols())?;
    let y = match family {
        GlmFamily::Gaussian => y,
        // accept +-1 labels in files and map them at ingestion
        GlmFamily::Bernoulli => map_labels_to_unit(y.as_slice().expect("contiguous"))
            .map_err(|e| CliError::parse(response_path.display().to_string(), e.to_string()))?,
    };
    let design = GroupedDesign::new(x, y, partition).map_err(from_solver)?;
    let cfg = settings.to_fit_config(kappa, p);
    cfg.validate().map_err(from_solver)?;
    let fit = fit_active_set(family, &design, &cfg).map_err(from_solver)?;

    let report = FitReport {
        family,
        p,
        kappa,
        lambda: fit.lambda,
        objective: fit.objective,
        mixed_norm: fit.beta.mixed_norm(p),
        constraint_active: fit.constraint_active,
        complete: fit.complete,
        unique_certified: fit.unique_certified,
        active_set: fit.active_set.clone(),
        completeness_set: fit.completeness_set.clone(),
        outer_iterations: fit.outer_iterations,
        inner_iteration_total: fit.inner_iteration_total,
        coefficients: sparse_coefficients(&fit, &names),
        config: cfg,
    };
    let mut text = serde_json::to_string_pretty(&report)
        .map_err(|e| CliError::usage(e.to_string()))?;
    text.push('\n');
    io::write_output(output, &text)
}

#[derive(Serialize)]
struct ProjectReport {
    p: PNorm,
    kappa: f64,
    mu: f64,
    outer_iterations: usize,
    constraint_active: bool,
    mixed_norm_input: f64,
    mixed_norm: f64,
    values: Vec<f64>,
}

pub fn cmd_project(
    vector_path: &Path,
    groups_path: &Path,
    p: PNorm,
    kappa: f64,
    output: &Path,
) -> CliResult<()> {
    let v = io::read_vector(vector_path)?;
    let (_, partition) = io::read_groups(groups_path, v.len())?;
    let input = Coefficients::new(v, partition).map_err(from_solver)?;
    let mixed_in = input.mixed_norm(p);
    let report = project_l1p_ball(&input, p, kappa, &Default::default()).map_err(from_solver)?;
    let out = ProjectReport {
        p,
        kappa,
        mu: report.mu,
        outer_iterations: report.outer_iterations,
        constraint_active: report.constraint_active,
        mixed_norm_input: mixed_in,
        mixed_norm: report.beta.mixed_norm(p),
        values: report.beta.values().to_vec(),
    };
    let mut text =
        serde_json::to_string_pretty(&out).map_err(|e| CliError::usage(e.to_string()))?;
    text.push('\n');
    io::write_output(output, &text)
}
