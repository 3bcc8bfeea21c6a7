//! Active-set solver for the mixed-norm constrained GLM, plus the
//! optimality, completeness and uniqueness diagnostics.
//!
//! The outer loop keeps a small set of active groups, solves the restricted
//! problem by projected gradient (each iterate is a ball projection of a
//! gradient step), and grows the set one largest-violator at a time until
//! the Lagrangian condition holds for every inactive group.

use std::time::{Duration, Instant};

use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::glm::{grad_nu_unchecked, nll_from_nu, Coefficients, GlmFamily, GroupedDesign};
use crate::norms::{group_dual_norms, p_norm_unchecked, GroupPartition, PNorm};
use crate::projection::{project_values, ProjectionCache, ProxTolerances};

/// Backtracking line-search policy for the projected-gradient inner loop.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StepPolicy {
    /// Step size tried on the first inner iteration.
    pub initial: f64,
    /// Multiplier applied on rejection, in (0, 1).
    pub backtrack: f64,
    /// Armijo sufficient-decrease constant, in (0, 1).
    pub sufficient_decrease: f64,
    /// When true, each line search starts from twice the last accepted step
    /// instead of resetting to `initial`. Saves most of the projection work
    /// on badly scaled problems without changing what the loop converges to.
    pub adaptive: bool,
}

impl Default for StepPolicy {
    fn default() -> Self {
        StepPolicy {
            initial: 1.0,
            backtrack: 0.5,
            sufficient_decrease: 1e-4,
            adaptive: true,
        }
    }
}

/// Everything a single fit needs besides the data.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    /// Mixed-norm budget kappa.
    pub kappa: f64,
    /// Inner norm exponent.
    pub p: PNorm,
    #[serde(default)]
    pub step: StepPolicy,
    /// Relative objective-decrease tolerance ending the inner loop.
    #[serde(default = "default_inner_tol")]
    pub inner_objective_tol: f64,
    /// Stationarity tolerance on the projected-gradient mapping, relative to
    /// the gradient scale. The inner loop keeps iterating past objective
    /// stalls until the mapping residual drops below this, which is what
    /// makes the dual norms of active groups line up to KKT precision.
    #[serde(default = "default_stationarity_tol")]
    pub stationarity_tol: f64,
    /// Relative slack on the lambda comparisons of Step C and the KKT check.
    #[serde(default = "default_lambda_tol")]
    pub lambda_tol: f64,
    /// Group-norm threshold for membership in the active set.
    #[serde(default = "default_active_norm_tol")]
    pub active_norm_tol: f64,
    /// Relative slack defining the completeness set B.
    #[serde(default = "default_completeness_tol")]
    pub completeness_tol: f64,
    #[serde(default = "default_max_outer")]
    pub max_outer_iterations: usize,
    #[serde(default = "default_max_inner")]
    pub max_inner_iterations: usize,
    #[serde(default)]
    pub projection: ProxTolerances,
    /// Overrides the steepest-gradient choice of the first active group.
    #[serde(default)]
    pub initial_group: Option<usize>,
    /// Wall-clock budget for one fit; exceeded budgets surface as
    /// convergence errors.
    #[serde(default)]
    pub max_wall_seconds: Option<f64>,
}

fn default_inner_tol() -> f64 {
    1e-9
}
fn default_stationarity_tol() -> f64 {
    1e-8
}
fn default_lambda_tol() -> f64 {
    1e-6
}
fn default_active_norm_tol() -> f64 {
    1e-10
}
fn default_completeness_tol() -> f64 {
    1e-6
}
fn default_max_outer() -> usize {
    500
}
fn default_max_inner() -> usize {
    200_000
}

impl FitConfig {
    pub fn new(kappa: f64, p: PNorm) -> Self {
        FitConfig {
            kappa,
            p,
            step: StepPolicy::default(),
            inner_objective_tol: default_inner_tol(),
            stationarity_tol: default_stationarity_tol(),
            lambda_tol: default_lambda_tol(),
            active_norm_tol: default_active_norm_tol(),
            completeness_tol: default_completeness_tol(),
            max_outer_iterations: default_max_outer(),
            max_inner_iterations: default_max_inner(),
            projection: ProxTolerances::default(),
            initial_group: None,
            max_wall_seconds: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kappa > 0.0) || !self.kappa.is_finite() {
            return Err(Error::invalid(format!("kappa must be positive, got {}", self.kappa)));
        }
        if !(self.step.initial > 0.0)
            || !(self.step.backtrack > 0.0 && self.step.backtrack < 1.0)
            || !(self.step.sufficient_decrease > 0.0 && self.step.sufficient_decrease < 1.0)
        {
            return Err(Error::invalid("step policy out of range"));
        }
        for (name, v) in [
            ("inner_objective_tol", self.inner_objective_tol),
            ("stationarity_tol", self.stationarity_tol),
            ("lambda_tol", self.lambda_tol),
            ("active_norm_tol", self.active_norm_tol),
            ("completeness_tol", self.completeness_tol),
        ] {
            if !(v > 0.0) {
                return Err(Error::invalid(format!("{name} must be positive")));
            }
        }
        if self.max_outer_iterations == 0 || self.max_inner_iterations == 0 {
            return Err(Error::invalid("iteration caps must be at least 1"));
        }
        self.projection.validate()
    }
}

/// Absolute slack distinguishing an active constraint from an interior
/// solution; the projection tolerance keeps boundary iterates well inside
/// this margin.
const CONSTRAINT_ACTIVITY_TOL: f64 = 1e-6;

/// Solution with the Step D diagnostics attached.
#[derive(Clone, Debug)]
pub struct FitResult {
    pub beta: Coefficients,
    /// Largest active-group dual norm at the solution (the constraint's
    /// Lagrange multiplier).
    pub lambda: f64,
    /// Groups with ||beta_j||_p above the active-norm threshold, ascending.
    pub active_set: Vec<usize>,
    /// Groups whose gradient dual norm attains lambda (within tolerance).
    pub completeness_set: Vec<usize>,
    /// active_set == completeness_set.
    pub complete: bool,
    /// Complete and the active column count is at most n. Contingent on the
    /// every-n-by-n-submatrix rank assumption, which is not verified.
    pub unique_certified: bool,
    pub constraint_active: bool,
    /// Negative log-likelihood at the solution (up to the dropped
    /// response-only constant).
    pub objective: f64,
    pub outer_iterations: usize,
    pub inner_iteration_total: usize,
    /// Restricted-optimum objective after each outer iteration.
    pub objective_trace: Vec<f64>,
}

/// Outcome of [`check_kkt`].
#[derive(Clone, Debug)]
pub struct KktReport {
    pub lambda: f64,
    pub dual_norms: Vec<f64>,
    pub pass: bool,
}

fn column_indices(partition: &GroupPartition, groups: &[usize]) -> Vec<usize> {
    groups.iter().flat_map(|&j| partition.range(j)).collect()
}

fn full_gradient(family: GlmFamily, design: &GroupedDesign, beta: &Array1<f64>) -> Array1<f64> {
    let nu = design.x().dot(beta);
    let r = grad_nu_unchecked(family, design.y().view(), nu.view());
    design.x().t().dot(&r)
}

pub(crate) struct PgSettings<'a> {
    pub(crate) family: GlmFamily,
    pub(crate) p: PNorm,
    pub(crate) kappa: f64,
    pub(crate) step: StepPolicy,
    pub(crate) objective_tol: f64,
    pub(crate) stationarity_tol: f64,
    pub(crate) max_iterations: usize,
    pub(crate) projection: &'a ProxTolerances,
    pub(crate) deadline: Option<Instant>,
}

pub(crate) struct PgOutcome {
    pub(crate) beta: Array1<f64>,
    pub(crate) iterations: usize,
    pub(crate) objective: f64,
    #[allow(dead_code)]
    pub(crate) exit: PgExit,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum PgExit {
    Stationary,
    MappingSmall,
    ObjectiveFloor,
}

/// Projected-gradient loop over a (possibly restricted) design. Accepted
/// steps are ball projections of gradient steps vetted by an Armijo test
/// along the projection arc; the loop ends when the relative objective
/// decrease drops below tolerance (the probing iterate is then discarded,
/// so a warm start at an optimum is a true fixed point) or when a projected
/// step no longer moves the iterate.
pub(crate) fn projected_gradient_loop(
    x: &Array2<f64>,
    y: &Array1<f64>,
    partition: &GroupPartition,
    start: Array1<f64>,
    s: &PgSettings<'_>,
    cache: &mut ProjectionCache,
) -> Result<PgOutcome> {
    let make_coef = |v: &Array1<f64>| {
        Coefficients::new(v.clone(), partition.clone()).expect("consistent dims")
    };
    let mut beta = start;
    // ensure a feasible starting point
    {
        let out = project_values(
            beta.as_slice().expect("contiguous"),
            partition,
            s.p,
            s.kappa,
            s.projection,
            cache,
        )?;
        beta = Array1::from(out.values);
    }
    let mut nu = x.dot(&beta);
    let mut obj = nll_from_nu(s.family, y.view(), nu.view());
    let mut step = s.step.initial;
    let mut iterations = 0usize;
    let mut stalls = 0usize;

    loop {
        if iterations >= s.max_iterations {
            return Err(Error::Convergence {
                message: "projected gradient hit its iteration cap".into(),
                iterations,
                last: Some(Box::new(make_coef(&beta))),
            });
        }
        if let Some(deadline) = s.deadline {
            if Instant::now() > deadline {
                return Err(Error::Convergence {
                    message: "projected gradient exceeded its wall-clock budget".into(),
                    iterations,
                    last: Some(Box::new(make_coef(&beta))),
                });
            }
        }
        let r = grad_nu_unchecked(s.family, y.view(), nu.view());
        let g = x.t().dot(&r);
        let g_scale = g.iter().fold(0.0f64, |m, &v| m.max(v.abs()));

        let beta_scale = beta.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
        // beyond this the projection of the gradient step is numerically
        // indistinguishable from the support point of -g, and the bisection
        // multiplier would outgrow the f64 resolution of the kappa window
        let s_cap = if g_scale > 0.0 {
            1e6 * (1.0 + s.kappa.max(beta_scale)) / g_scale
        } else {
            f64::INFINITY
        };
        let stat_threshold =
            (2.0 * s.projection.outer_kappa_tol).max(1e-15 * (1.0 + beta_scale));
        let mut s_try = if s.step.adaptive { step } else { s.step.initial }.min(s_cap);
        let mut accepted: Option<(Array1<f64>, Array1<f64>, f64, f64, f64)> = None;
        let mut stationary = false;
        let mut first_trial = true;
        let mut smallest_move = f64::INFINITY;
        while s_try >= 1e-20 {
            let trial = &beta - &(s_try * &g);
            if trial.iter().any(|v| !v.is_finite()) {
                s_try *= s.step.backtrack;
                first_trial = false;
                continue;
            }
            let proj = project_values(
                trial.as_slice().expect("contiguous"),
                partition,
                s.p,
                s.kappa,
                s.projection,
                cache,
            )?;
            let cand = Array1::from(proj.values);
            let move_inf = cand
                .iter()
                .zip(beta.iter())
                .fold(0.0f64, |m, (c, b)| m.max((c - b).abs()));
            smallest_move = smallest_move.min(move_inf);
            // "does not move" at the largest step of this search implies,
            // by monotonicity of the projection arc, no smaller step moves
            // either: a stationary point up to projection noise
            if first_trial && move_inf <= stat_threshold {
                stationary = true;
                break;
            }
            first_trial = false;
            let dir_deriv: f64 = cand
                .iter()
                .zip(beta.iter())
                .zip(g.iter())
                .map(|((c, b), gi)| (c - b) * gi)
                .sum();
            let cand_nu = x.dot(&cand);
            let cand_obj = nll_from_nu(s.family, y.view(), cand_nu.view());
            if cand_obj.is_finite()
                && dir_deriv < 0.0
                && cand_obj <= obj + s.step.sufficient_decrease * dir_deriv
            {
                accepted = Some((cand, cand_nu, cand_obj, s_try, move_inf));
                break;
            }
            s_try *= s.step.backtrack;
        }

        match accepted {
            None => {
                if stationary || smallest_move <= stat_threshold {
                    // either a certified fixed point or a search pinned to
                    // the numerical floor of the projection
                    return Ok(PgOutcome { beta, iterations, objective: obj, exit: PgExit::Stationary });
                }
                return Err(Error::Convergence {
                    message: "line search underflowed at a non-stationary point".into(),
                    iterations,
                    last: Some(Box::new(make_coef(&beta))),
                });
            }
            Some((cand, cand_nu, cand_obj, s_acc, move_inf)) => {
                iterations += 1;
                let decrease = obj - cand_obj;
                if decrease <= s.objective_tol * (1.0 + obj.abs()) {
                    // objective progress has stalled; stop only once the
                    // projected-gradient mapping is small too, otherwise the
                    // dual norms are not yet at KKT precision. Normalizing
                    // by min(s, 1) keeps the measure honest for the huge
                    // steps of well-conditioned problems, where the
                    // candidate is the support point of -g and the raw move
                    // is itself the violation measure.
                    let mapping = move_inf / s_acc.min(1.0);
                    if mapping <= s.stationarity_tol * (1.0 + g_scale) {
                        // keep the previous iterate so a warm start at an
                        // optimum is a true fixed point
                        return Ok(PgOutcome { beta, iterations, objective: obj, exit: PgExit::MappingSmall });
                    }
                    if decrease <= f64::EPSILON * (1.0 + obj.abs()) {
                        stalls += 1;
                        if stalls >= 16 {
                            // the objective cannot resolve further progress
                            return Ok(PgOutcome {
                                beta: cand,
                                iterations,
                                objective: cand_obj,
                                exit: PgExit::ObjectiveFloor,
                            });
                        }
                    } else {
                        stalls = 0;
                    }
                } else {
                    stalls = 0;
                }
                beta = cand;
                nu = cand_nu;
                obj = cand_obj;
                step = (s_acc * 2.0).min(1e12);
            }
        }
    }
}

/// Runs the inner solver over the given active set and returns the full
/// dimension iterate (coordinates outside the set stay zero).
pub fn projected_gradient_restricted(
    family: GlmFamily,
    design: &GroupedDesign,
    beta: &Coefficients,
    active: &[usize],
    config: &FitConfig,
) -> Result<Coefficients> {
    config.validate()?;
    family.validate_response(design.y().view())?;
    let part = design.partition();
    if beta.partition() != part {
        return Err(Error::dims("coefficient partition does not match the design"));
    }
    let mut groups: Vec<usize> = active.to_vec();
    groups.sort_unstable();
    groups.dedup();
    if groups.is_empty() {
        return Err(Error::invalid("active set must be non-empty"));
    }
    if groups.iter().any(|&j| j >= part.num_groups()) {
        return Err(Error::invalid("active set contains an out-of-range group"));
    }
    let values = beta.values().as_slice().expect("contiguous");
    for j in 0..part.num_groups() {
        if !groups.contains(&j) && values[part.range(j)].iter().any(|&v| v != 0.0) {
            return Err(Error::invalid(format!(
                "coordinates of inactive group {j} must be zero"
            )));
        }
    }
    let restricted = crate::norms::mixed_norm_unchecked(values, part, config.p);
    if restricted > config.kappa + config.projection.outer_kappa_tol {
        return Err(Error::invalid("starting point is infeasible for the restricted problem"));
    }

    let cols = column_indices(part, &groups);
    let sub_x = design.x().select(Axis(1), &cols);
    let sub_part = part.restrict(&groups)?;
    let sub_start = Array1::from(cols.iter().map(|&c| values[c]).collect::<Vec<_>>());
    let settings = PgSettings {
        family,
        p: config.p,
        kappa: config.kappa,
        step: config.step,
        objective_tol: config.inner_objective_tol,
        stationarity_tol: config.stationarity_tol,
        max_iterations: config.max_inner_iterations,
        projection: &config.projection,
        deadline: config.max_wall_seconds.map(|w| Instant::now() + Duration::from_secs_f64(w)),
    };
    let mut cache = ProjectionCache::new(&sub_part);
    let out = projected_gradient_loop(&sub_x, design.y(), &sub_part, sub_start, &settings, &mut cache)?;

    let mut full = Array1::zeros(design.dim());
    for (&c, &v) in cols.iter().zip(out.beta.iter()) {
        full[c] = v;
    }
    Coefficients::new(full, part.clone())
}

/// Fits the constrained GLM by the active-set algorithm, starting from the
/// steepest group at the origin.
pub fn fit_active_set(
    family: GlmFamily,
    design: &GroupedDesign,
    config: &FitConfig,
) -> Result<FitResult> {
    fit_impl(family, design, config, None)
}

/// Same as [`fit_active_set`] but warm-started: the given coefficients are
/// rescaled into the feasible ball and their nonzero groups seed the active
/// set.
pub fn fit_active_set_warm(
    family: GlmFamily,
    design: &GroupedDesign,
    config: &FitConfig,
    warm: &Coefficients,
) -> Result<FitResult> {
    fit_impl(family, design, config, Some(warm))
}

fn fit_impl(
    family: GlmFamily,
    design: &GroupedDesign,
    config: &FitConfig,
    warm: Option<&Coefficients>,
) -> Result<FitResult> {
    config.validate()?;
    family.validate_response(design.y().view())?;
    let part = design.partition().clone();
    let j_total = part.num_groups();
    if let Some(j0) = config.initial_group {
        if j0 >= j_total {
            return Err(Error::invalid(format!("initial group {j0} out of range")));
        }
    }
    let q = config.p.dual();
    let deadline = config
        .max_wall_seconds
        .map(|w| Instant::now() + Duration::from_secs_f64(w));

    let mut beta: Array1<f64> = Array1::zeros(design.dim());
    let mut active: Vec<usize> = Vec::new();

    if let Some(w) = warm {
        if w.partition() != &part {
            return Err(Error::dims("warm start partition does not match the design"));
        }
        beta.assign(w.values());
        let mixed =
            crate::norms::mixed_norm_unchecked(beta.as_slice().expect("contiguous"), &part, config.p);
        if mixed > config.kappa {
            beta *= config.kappa / mixed;
        }
        for j in 0..j_total {
            let r = part.range(j);
            let norm = p_norm_unchecked(&beta.as_slice().expect("contiguous")[r.clone()], config.p);
            if norm > config.active_norm_tol {
                active.push(j);
            } else {
                for c in r {
                    beta[c] = 0.0;
                }
            }
        }
    }

    // gradient scale at the starting point, used as an absolute floor for
    // the otherwise relative lambda comparisons
    let h0 = full_gradient(family, design, &beta);
    let dual0 = group_dual_norms(h0.as_slice().expect("contiguous"), &part, q)?;
    let dual_scale = dual0.iter().cloned().fold(0.0f64, f64::max);
    let lambda_floor = 1e-12 * (1.0 + dual_scale);

    if active.is_empty() {
        // Step A: single steepest group, started on the kappa sphere along
        // its negative gradient
        let steepest = dual0
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).expect("finite"))
            .map(|(j, _)| j)
            .expect("at least one group");
        if dual_scale == 0.0 {
            // gradient vanishes at the origin: beta = 0 is already optimal
            return finalize(
                family, design, config, beta, 0.0, dual0, Vec::new(), 0, 0,
                Vec::new(),
            );
        }
        let j0 = config.initial_group.unwrap_or(steepest);
        let r = part.range(j0);
        let hj = &h0.as_slice().expect("contiguous")[r.clone()];
        let hn = p_norm_unchecked(hj, config.p);
        if hn > 0.0 {
            for (offset, c) in r.enumerate() {
                beta[c] = -config.kappa * hj[offset] / hn;
            }
        } else {
            // overridden start in a zero-gradient group: any boundary point
            beta[r.start] = config.kappa;
        }
        active.push(j0);
    }

    let mut inner_total = 0usize;
    let mut trace: Vec<f64> = Vec::new();
    let mut dual: Vec<f64> = dual0;
    let mut lambda = 0.0f64;
    let mut converged = false;
    let mut outer_done = 0usize;

    for outer in 1..=config.max_outer_iterations {
        outer_done = outer;
        if let Some(dl) = deadline {
            if Instant::now() > dl {
                return Err(Error::Convergence {
                    message: "active-set loop exceeded its wall-clock budget".into(),
                    iterations: outer,
                    last: Some(Box::new(Coefficients::new(beta, part)?)),
                });
            }
        }
        active.sort_unstable();

        // Step B: optimize over the current active set
        let cols = column_indices(&part, &active);
        let sub_x = design.x().select(Axis(1), &cols);
        let sub_part = part.restrict(&active)?;
        let sub_start = Array1::from(cols.iter().map(|&c| beta[c]).collect::<Vec<_>>());
        let settings = PgSettings {
            family,
            p: config.p,
            kappa: config.kappa,
            step: config.step,
            objective_tol: config.inner_objective_tol,
            stationarity_tol: config.stationarity_tol,
            max_iterations: config.max_inner_iterations,
            projection: &config.projection,
            deadline,
        };
        let mut cache = ProjectionCache::new(&sub_part);
        let out = projected_gradient_loop(&sub_x, design.y(), &sub_part, sub_start, &settings, &mut cache)?;
        inner_total += out.iterations;
        trace.push(out.objective);
        for (&c, &v) in cols.iter().zip(out.beta.iter()) {
            beta[c] = v;
        }

        // gradients at the restricted optimum
        let h = full_gradient(family, design, &beta);
        dual = group_dual_norms(h.as_slice().expect("contiguous"), &part, q)?;

        // A+ = groups that kept a nonzero block; dropped blocks snap to zero
        let mut aplus = Vec::with_capacity(active.len());
        for &j in &active {
            let r = part.range(j);
            let norm = p_norm_unchecked(&beta.as_slice().expect("contiguous")[r.clone()], config.p);
            if norm > config.active_norm_tol {
                aplus.push(j);
            } else {
                for c in r {
                    beta[c] = 0.0;
                }
            }
        }
        lambda = if aplus.is_empty() {
            dual.iter().cloned().fold(0.0f64, f64::max)
        } else {
            aplus.iter().map(|&j| dual[j]).fold(0.0f64, f64::max)
        };
        active = aplus;

        // Step C: Lagrangian violation over inactive groups
        let mut worst: Option<(usize, f64)> = None;
        for (j, &dj) in dual.iter().enumerate() {
            if active.binary_search(&j).is_ok() {
                continue;
            }
            if dj > lambda * (1.0 + config.lambda_tol) + lambda_floor
                && worst.map_or(true, |(_, best)| dj > best)
            {
                worst = Some((j, dj));
            }
        }
        match worst {
            None => {
                converged = true;
                break;
            }
            Some((j, _)) => active.push(j),
        }
    }

    if !converged {
        return Err(Error::Convergence {
            message: "active-set loop hit the outer iteration cap".into(),
            iterations: outer_done,
            last: Some(Box::new(Coefficients::new(beta, part)?)),
        });
    }

    finalize(
        family, design, config, beta, lambda, dual, active, outer_done, inner_total, trace,
    )
}

#[allow(clippy::too_many_arguments)]
fn finalize(
    family: GlmFamily,
    design: &GroupedDesign,
    config: &FitConfig,
    beta: Array1<f64>,
    lambda: f64,
    dual: Vec<f64>,
    active: Vec<usize>,
    outer_iterations: usize,
    inner_iteration_total: usize,
    objective_trace: Vec<f64>,
) -> Result<FitResult> {
    let part = design.partition().clone();
    let nu = design.x().dot(&beta);
    let objective = nll_from_nu(family, design.y().view(), nu.view());
    let mixed = crate::norms::mixed_norm_unchecked(beta.as_slice().expect("contiguous"), &part, config.p);
    let constraint_active = config.kappa - mixed <= CONSTRAINT_ACTIVITY_TOL;

    let mut active = active;
    active.sort_unstable();
    let completeness_set = if constraint_active {
        (0..part.num_groups())
            .filter(|&j| dual[j] >= lambda * (1.0 - config.completeness_tol))
            .collect::<Vec<_>>()
    } else {
        // the completeness test presumes an active constraint; report the
        // vacuous set so A = B
        active.clone()
    };
    let complete = completeness_set == active;
    let active_cols: usize = active.iter().map(|&j| part.sizes()[j]).sum();
    let unique_certified = if constraint_active {
        complete && active_cols <= design.num_rows()
    } else {
        design.dim() <= design.num_rows()
    };

    Ok(FitResult {
        beta: Coefficients::new(beta, part)?,
        lambda,
        active_set: active,
        completeness_set,
        complete,
        unique_certified,
        constraint_active,
        objective,
        outer_iterations,
        inner_iteration_total,
        objective_trace,
    })
}

/// Evaluates the stationarity conditions at the given point: every active
/// group's dual norm must sit within `lambda_tol` (relative) of lambda, and
/// every inactive group's at most lambda (same slack). When the point lies
/// strictly inside the ball, complementary slackness forces lambda = 0 and
/// the whole gradient must vanish (relative to its scale at the origin).
pub fn check_kkt(
    family: GlmFamily,
    design: &GroupedDesign,
    beta: &Coefficients,
    config: &FitConfig,
) -> Result<KktReport> {
    if beta.partition() != design.partition() {
        return Err(Error::dims("coefficient partition does not match the design"));
    }
    let q = config.p.dual();
    let part = design.partition();
    let h = full_gradient(family, design, beta.values());
    let dual = group_dual_norms(h.as_slice().expect("contiguous"), part, q)?;

    let mixed = beta.mixed_norm(config.p);
    if config.kappa - mixed > CONSTRAINT_ACTIVITY_TOL {
        // slack constraint: the multiplier is zero
        let zero = Array1::zeros(design.dim());
        let h0 = full_gradient(family, design, &zero);
        let dual0 = group_dual_norms(h0.as_slice().expect("contiguous"), part, q)?;
        let scale = dual0.iter().cloned().fold(0.0f64, f64::max);
        let maxdual = dual.iter().cloned().fold(0.0f64, f64::max);
        let pass = maxdual <= config.lambda_tol * (1.0 + scale);
        return Ok(KktReport { lambda: 0.0, dual_norms: dual, pass });
    }

    let active: Vec<usize> = (0..part.num_groups())
        .filter(|&j| beta.group_norm(j, config.p) > config.active_norm_tol)
        .collect();
    let lambda = if active.is_empty() {
        dual.iter().cloned().fold(0.0f64, f64::max)
    } else {
        active.iter().map(|&j| dual[j]).fold(0.0f64, f64::max)
    };
    let slack = lambda * config.lambda_tol + 1e-12 * (1.0 + lambda);
    let mut pass = true;
    for j in 0..part.num_groups() {
        let is_active = active.binary_search(&j).is_ok();
        if is_active {
            if (dual[j] - lambda).abs() > slack {
                pass = false;
            }
        } else if dual[j] > lambda + slack {
            pass = false;
        }
    }
    Ok(KktReport { lambda, dual_norms: dual, pass })
}

/// Recomputes the completeness set B at a fit result and compares it with
/// the active set.
pub fn check_completeness(
    family: GlmFamily,
    design: &GroupedDesign,
    result: &FitResult,
    config: &FitConfig,
) -> Result<(Vec<usize>, bool)> {
    let q = config.p.dual();
    let h = full_gradient(family, design, result.beta.values());
    let dual = group_dual_norms(h.as_slice().expect("contiguous"), design.partition(), q)?;
    let lambda = if result.active_set.is_empty() {
        dual.iter().cloned().fold(0.0f64, f64::max)
    } else {
        result.active_set.iter().map(|&j| dual[j]).fold(0.0f64, f64::max)
    };
    let bset: Vec<usize> = (0..design.partition().num_groups())
        .filter(|&j| dual[j] >= lambda * (1.0 - config.completeness_tol))
        .collect();
    let complete = bset == result.active_set;
    Ok((bset, complete))
}

/// Uniqueness certificate: complete and at most n active columns. When the
/// constraint came out inactive the question reduces to d <= n.
pub fn check_uniqueness(design: &GroupedDesign, result: &FitResult) -> bool {
    if !result.constraint_active {
        return design.dim() <= design.num_rows();
    }
    let s: usize = result
        .active_set
        .iter()
        .map(|&j| design.partition().sizes()[j])
        .sum();
    result.complete && s <= design.num_rows()
}

/// Fits along a decreasing kappa grid, warm-starting each point from the
/// previous solution rescaled into the new ball. Repeated kappa values are
/// allowed (the warm start is then already optimal); increasing ones are
/// not. Per-point errors are recorded without aborting the rest of the
/// path.
pub fn regularization_path(
    family: GlmFamily,
    design: &GroupedDesign,
    kappas: &[f64],
    config: &FitConfig,
) -> Result<Vec<Result<FitResult>>> {
    if kappas.is_empty() {
        return Err(Error::invalid("kappa grid is empty"));
    }
    if kappas.windows(2).any(|w| w[1] > w[0]) {
        return Err(Error::invalid("kappa grid must be non-increasing"));
    }
    if kappas.iter().any(|&k| !(k > 0.0)) {
        return Err(Error::invalid("kappa grid entries must be positive"));
    }
    let mut out = Vec::with_capacity(kappas.len());
    let mut warm: Option<Coefficients> = None;
    for &kappa in kappas {
        let mut cfg = config.clone();
        cfg.kappa = kappa;
        let fit = match &warm {
            Some(w) => fit_active_set_warm(family, design, &cfg, w),
            None => fit_active_set(family, design, &cfg),
        };
        if let Ok(res) = &fit {
            warm = Some(res.beta.clone());
        }
        out.push(fit);
    }
    Ok(out)
}
