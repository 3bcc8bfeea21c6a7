//! Independent brute-force references backing the test suite: a grid-search
//! prox minimizer, a full-set projected-gradient solver that never restricts
//! to an active set, finite-difference gradients, and the stationarity
//! residual of the prox subproblem.
//!
//! Nothing here shares a code path with the closed-form or root-finding
//! solvers it is used to check, apart from the shared projection inside the
//! full-set baseline (which is exactly the piece that baseline is meant to
//! exercise without the active-set logic).

use std::time::{Duration, Instant};

use ndarray::Array1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::glm::{Coefficients, GlmFamily, GroupedDesign};
use crate::norms::{p_norm_unchecked, PNorm};
use crate::projection::ProjectionCache;
use crate::solver::{projected_gradient_loop, PgSettings, StepPolicy};

/// Budgets for the brute-force references.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleBudget {
    /// Coarse grid resolution for the prox grid search.
    pub grid_step: f64,
    /// Resolution of the local refinement around the coarse minimizer.
    pub refine_step: f64,
    /// Iteration cap for the full-set projected gradient.
    pub max_iters: usize,
    /// Relative objective-decrease tolerance for the full-set baseline.
    pub tol: f64,
    /// Optional wall-clock budget for the full-set baseline.
    pub max_wall_seconds: Option<f64>,
}

impl Default for OracleBudget {
    fn default() -> Self {
        OracleBudget {
            grid_step: 1e-4,
            refine_step: 1e-6,
            max_iters: 1_000_000,
            tol: 1e-12,
            max_wall_seconds: None,
        }
    }
}

/// Minimizer of `||b - x||^2 + mu ||x||_p` over `[-||b||_inf, ||b||_inf]^dim`
/// by a shrinking-window grid search: 33 points per axis, window halved
/// around the incumbent until the spacing reaches `refine_step`.
///
/// Dimension is capped at 3 (grid cost).
pub fn prox_grid_oracle(b: &[f64], mu: f64, p: PNorm, budget: &OracleBudget) -> Result<Vec<f64>> {
    let dim = b.len();
    if dim == 0 || dim > 3 {
        return Err(Error::invalid(format!(
            "grid oracle supports dimensions 1..=3, got {dim}"
        )));
    }
    if !(mu >= 0.0) || !mu.is_finite() {
        return Err(Error::invalid("mu must be finite and >= 0"));
    }
    if b.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("grid oracle input must be finite"));
    }
    let bound = b.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
    if bound == 0.0 {
        return Ok(vec![0.0; dim]);
    }
    let objective = |x: &[f64]| -> f64 {
        let quad: f64 = x.iter().zip(b).map(|(xi, bi)| (xi - bi) * (xi - bi)).sum();
        quad + mu * p_norm_unchecked(x, p)
    };

    const HALF_POINTS: i64 = 16; // 33 points per axis
    let mut center = vec![0.0f64; dim];
    let mut half = bound;
    loop {
        let h = half / HALF_POINTS as f64;
        let mut best = center.clone();
        let mut best_val = f64::INFINITY;
        let mut point = vec![0.0f64; dim];
        let per_axis = (2 * HALF_POINTS + 1) as usize;
        let total = per_axis.pow(dim as u32);
        for idx in 0..total {
            let mut rem = idx;
            for (a, c) in point.iter_mut().zip(&center) {
                let k = (rem % per_axis) as i64 - HALF_POINTS;
                rem /= per_axis;
                *a = c + k as f64 * h;
            }
            let val = objective(&point);
            if val < best_val {
                best_val = val;
                best.copy_from_slice(&point);
            }
        }
        center = best;
        if h <= budget.refine_step {
            return Ok(center);
        }
        half *= 0.5;
    }
}

/// Projected gradient over the full group set, run to tiny tolerances. The
/// equivalence reference for the active-set solver and the timing baseline
/// for the group-count scaling comparison.
pub fn full_set_projected_gradient(
    family: GlmFamily,
    design: &GroupedDesign,
    kappa: f64,
    p: PNorm,
    budget: &OracleBudget,
) -> Result<Coefficients> {
    if !(kappa > 0.0) {
        return Err(Error::invalid("kappa must be positive"));
    }
    family.validate_response(design.y().view())?;
    let part = design.partition().clone();
    let projection = crate::projection::ProxTolerances::default();
    let settings = PgSettings {
        family,
        p,
        kappa,
        step: StepPolicy::default(),
        objective_tol: budget.tol,
        stationarity_tol: 1e-10,
        max_iterations: budget.max_iters,
        projection: &projection,
        deadline: budget
            .max_wall_seconds
            .map(|w| Instant::now() + Duration::from_secs_f64(w)),
    };
    let mut cache = ProjectionCache::new(&part);
    let start = Array1::zeros(design.dim());
    let out = projected_gradient_loop(design.x(), design.y(), &part, start, &settings, &mut cache)?;
    Coefficients::new(out.beta, part)
}

/// Central finite differences of an arbitrary objective.
pub fn finite_difference_gradient<F>(f: F, beta: &Array1<f64>, h: f64) -> Array1<f64>
where
    F: Fn(&Array1<f64>) -> f64,
{
    let mut grad = Array1::zeros(beta.len());
    let mut probe = beta.clone();
    for i in 0..beta.len() {
        probe[i] = beta[i] + h;
        let plus = f(&probe);
        probe[i] = beta[i] - h;
        let minus = f(&probe);
        probe[i] = beta[i];
        grad[i] = (plus - minus) / (2.0 * h);
    }
    grad
}

/// Euclidean projection onto the unit simplex.
fn project_onto_simplex(t: &[f64]) -> Vec<f64> {
    let mut u = t.to_vec();
    u.sort_unstable_by(|a, b| b.partial_cmp(a).expect("finite"));
    let mut cum = 0.0;
    let mut tau = 0.0;
    for (k, &uk) in u.iter().enumerate() {
        cum += uk;
        let cand = (cum - 1.0) / (k + 1) as f64;
        if uk - cand > 0.0 {
            tau = cand;
        } else {
            break;
        }
    }
    t.iter().map(|&x| (x - tau).max(0.0)).collect()
}

/// Distance of 0 from `2(beta - b) + mu * d||beta||_p`, the stationarity
/// condition of the prox subproblem. For a zero `beta` this is the zero-rule
/// violation `max(0, 2||b||_q - mu)`.
pub fn prox_kkt_residual(b: &[f64], beta: &[f64], mu: f64, p: PNorm) -> f64 {
    assert_eq!(b.len(), beta.len());
    let q = p.dual();
    if beta.iter().all(|&x| x == 0.0) {
        return (2.0 * p_norm_unchecked(b, q) - mu).max(0.0);
    }
    if p.is_inf() {
        // subgradient: convex combination over the max-magnitude coordinates
        let max = p_norm_unchecked(beta, p);
        let in_max: Vec<usize> = (0..beta.len())
            .filter(|&i| beta[i].abs() >= max * (1.0 - 1e-9))
            .collect();
        let targets: Vec<f64> = in_max
            .iter()
            .map(|&i| -2.0 * (beta[i] - b[i]) * beta[i].signum() / mu)
            .collect();
        let weights = project_onto_simplex(&targets);
        let mut sq = 0.0;
        let mut w_iter = weights.iter();
        for i in 0..beta.len() {
            let r = if in_max.contains(&i) {
                let w = *w_iter.next().expect("weight per max coordinate");
                2.0 * (beta[i] - b[i]) + mu * beta[i].signum() * w
            } else {
                2.0 * (beta[i] - b[i])
            };
            sq += r * r;
        }
        return sq.sqrt();
    }
    let pv = p.value();
    if pv == 1.0 {
        let mut sq = 0.0;
        for i in 0..beta.len() {
            let r = if beta[i] != 0.0 {
                2.0 * (beta[i] - b[i]) + mu * beta[i].signum()
            } else {
                (2.0 * (beta[i] - b[i]).abs() - mu).max(0.0)
            };
            sq += r * r;
        }
        return sq.sqrt();
    }
    // differentiable case 1 < p < inf at beta != 0
    let rho = p_norm_unchecked(beta, p);
    let mut sq = 0.0;
    for i in 0..beta.len() {
        let g = beta[i].signum() * (beta[i].abs() / rho).powf(pv - 1.0);
        let r = 2.0 * (beta[i] - b[i]) + mu * g;
        sq += r * r;
    }
    sq.sqrt()
}
