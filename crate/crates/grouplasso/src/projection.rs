//! Proximal machinery for the mixed l1,p ball.
//!
//! Two layers: the per-group prox of `mu * ||.||_p` under the objective
//! `||b - beta||_2^2 + mu * ||beta||_p` (note: no 1/2 on the quadratic, so
//! every threshold carries a factor 2), and the Euclidean projection onto
//! `{beta : sum_j ||beta_j||_p <= kappa}` obtained by interval bisection on
//! the multiplier mu.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::glm::Coefficients;
use crate::norms::{p_norm_unchecked, GroupPartition, PNorm};

/// Tolerances and iteration caps for the prox and ball-projection solvers.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProxTolerances {
    /// Absolute tolerance on |mixed_norm(beta) - kappa| for the outer
    /// mu-bisection.
    pub outer_kappa_tol: f64,
    /// Relative tolerance for the scalar root solves inside the general-p
    /// prox.
    pub inner_root_tol: f64,
    /// Cap on mu-bisection steps.
    pub max_outer_bisections: usize,
    /// Cap on iterations for each scalar solve inside the prox.
    pub max_inner_iters: usize,
}

impl Default for ProxTolerances {
    fn default() -> Self {
        ProxTolerances {
            outer_kappa_tol: 1e-8,
            inner_root_tol: 1e-12,
            max_outer_bisections: 200,
            max_inner_iters: 200,
        }
    }
}

impl ProxTolerances {
    pub fn validate(&self) -> Result<()> {
        if !(self.outer_kappa_tol > 0.0) || !(self.inner_root_tol > 0.0) {
            return Err(Error::invalid("prox tolerances must be positive"));
        }
        if self.max_outer_bisections == 0 || self.max_inner_iters == 0 {
            return Err(Error::invalid("prox iteration caps must be at least 1"));
        }
        Ok(())
    }
}

/// Outcome of a ball projection.
#[derive(Clone, Debug)]
pub struct ProjectionReport {
    pub beta: Coefficients,
    /// Lagrange multiplier of the norm constraint; 0 when the input was
    /// already feasible.
    pub mu: f64,
    pub outer_iterations: usize,
    pub constraint_active: bool,
}

/// Scalar soft threshold at mu/2: argmin (b - x)^2 + mu |x|.
fn soft_threshold(b: f64, mu: f64) -> f64 {
    let t = mu * 0.5;
    if b > t {
        b - t
    } else if b < -t {
        b + t
    } else {
        0.0
    }
}

/// Euclidean projection onto the l1 ball of the given radius, by the usual
/// sort-and-threshold rule.
pub(crate) fn project_onto_l1_ball(v: &[f64], radius: f64) -> Vec<f64> {
    if radius <= 0.0 {
        return vec![0.0; v.len()];
    }
    let l1: f64 = v.iter().map(|x| x.abs()).sum();
    if l1 <= radius {
        return v.to_vec();
    }
    let mut u: Vec<f64> = v.iter().map(|x| x.abs()).collect();
    u.sort_unstable_by(|a, b| b.partial_cmp(a).expect("finite"));
    // the single-coordinate support is always valid (u[0] - theta = radius
    // > 0 in exact arithmetic), so seed theta there; the loop test can
    // round to zero when the radius is ulp-small against tied maxima
    let mut cum = u[0];
    let mut theta = u[0] - radius;
    for (k, &uk) in u.iter().enumerate().skip(1) {
        cum += uk;
        let t = (cum - radius) / (k + 1) as f64;
        if uk - t > 0.0 {
            theta = t;
        } else {
            break;
        }
    }
    v.iter()
        .map(|&x| x.signum() * (x.abs() - theta).max(0.0))
        .collect()
}

/// Solves 2(x - b) + mu (x / rho)^(p-1) = 0 for x in [0, b], b > 0, by
/// Newton steps safeguarded with bisection. `start` is a warm-start guess.
fn solve_coordinate(b: f64, mu: f64, p: f64, rho: f64, start: f64, tol: &ProxTolerances) -> f64 {
    let ftol = tol.inner_root_tol * (1.0 + 2.0 * b);
    let mut lo = 0.0f64;
    let mut hi = b;
    let mut x = if start > 0.0 && start < b { start } else { 0.5 * b };
    for _ in 0..tol.max_inner_iters {
        let ratio = x / rho;
        let f = 2.0 * (x - b) + mu * ratio.powf(p - 1.0);
        if f.is_finite() {
            if f.abs() <= ftol {
                return x;
            }
            if f > 0.0 {
                hi = x;
            } else {
                lo = x;
            }
        } else {
            // overflow in the power term: the penalty dominates here
            hi = x;
        }
        if hi - lo <= tol.inner_root_tol * b {
            return 0.5 * (lo + hi);
        }
        let deriv = 2.0 + mu * (p - 1.0) * ratio.powf(p - 2.0) / rho;
        let newton = if f.is_finite() && deriv.is_finite() && deriv > 0.0 {
            x - f / deriv
        } else {
            f64::NAN
        };
        x = if newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
    }
    0.5 * (lo + hi)
}

/// Per-group warm-start state reused across prox calls inside one
/// projected-gradient loop. Purely an accelerator: results agree with the
/// cold path to the root tolerances.
#[derive(Clone, Debug)]
pub(crate) struct ProxScratch {
    beta: Vec<f64>,
    rho: f64,
}

impl ProxScratch {
    fn empty() -> Self {
        ProxScratch { beta: Vec::new(), rho: 0.0 }
    }
}

/// General-p prox on the nonnegative orthant. `absb` must hold the absolute
/// values of the input with at least one strictly positive entry, and the
/// zero rule must already have been ruled out (2 ||b||_q > mu).
///
/// The consistency equation phi(rho) = ||beta(rho)||_p - rho has a single
/// sign change on (0, ||b||_p]: positive below the root, negative above.
/// A geometric scan establishes the bracket and a bracketed false-position
/// iteration (Illinois variant, bisection fallback) closes in on the root.
fn prox_general_nonneg(
    absb: &[f64],
    mu: f64,
    p: f64,
    tol: &ProxTolerances,
    warm: Option<&mut ProxScratch>,
) -> Vec<f64> {
    let pn = PNorm::new(p).expect("validated");
    let norm_b = p_norm_unchecked(absb, pn);
    let warm_state = warm.as_ref().filter(|s| s.beta.len() == absb.len());
    let mut beta = match warm_state {
        Some(s) => s.beta.clone(),
        None => vec![0.0f64; absb.len()],
    };
    let warm_rho = warm_state.map(|s| s.rho).unwrap_or(0.0);

    let eval_phi = |rho: f64, beta: &mut Vec<f64>| -> f64 {
        for (i, &b) in absb.iter().enumerate() {
            beta[i] = if b > 0.0 {
                solve_coordinate(b, mu, p, rho, beta[i], tol)
            } else {
                0.0
            };
        }
        p_norm_unchecked(beta, pn) - rho
    };

    // establish a bracket [lo, hi] with phi(lo) > 0 >= phi(hi)
    let mut lo;
    let mut hi;
    let mut phi_lo;
    let mut phi_hi;
    let mut bracketed = false;
    if warm_rho > 0.0 && warm_rho < norm_b {
        // try a window around the previous root first
        let hi0 = (warm_rho * 2.0).min(norm_b);
        let f_hi0 = eval_phi(hi0, &mut beta);
        if f_hi0 > 0.0 {
            lo = hi0;
            phi_lo = f_hi0;
            hi = norm_b;
            phi_hi = eval_phi(hi, &mut beta);
            bracketed = phi_hi <= 0.0;
        } else {
            hi = hi0;
            phi_hi = f_hi0;
            lo = warm_rho * 0.5;
            phi_lo = eval_phi(lo, &mut beta);
            bracketed = phi_lo > 0.0;
        }
        if !bracketed {
            // fall through to the cold-start scan from the current window
            if phi_hi > 0.0 {
                hi = norm_b;
                phi_hi = eval_phi(hi, &mut beta);
            }
        }
    } else {
        hi = norm_b;
        phi_hi = eval_phi(hi, &mut beta);
        lo = hi;
        phi_lo = phi_hi;
    }
    if !bracketed {
        if phi_hi >= 0.0 && hi >= norm_b {
            // only reachable through rounding when mu is vanishingly small;
            // beta(norm_b) is the boundary solution
            store_scratch(warm, &beta, hi);
            return beta;
        }
        lo = hi * 0.25;
        phi_lo = eval_phi(lo, &mut beta);
        let mut walk = 0usize;
        while phi_lo <= 0.0 {
            hi = lo;
            phi_hi = phi_lo;
            lo *= 0.25;
            walk += 1;
            if walk > 600 || lo < f64::MIN_POSITIVE * 1e16 {
                // indistinguishable from the zero vector at this scale
                for v in beta.iter_mut() {
                    *v = 0.0;
                }
                store_scratch(warm, &beta, 0.0);
                return beta;
            }
            phi_lo = eval_phi(lo, &mut beta);
        }
    }

    let mut side = 0i8;
    let mut root = 0.5 * (lo + hi);
    for _ in 0..tol.max_inner_iters {
        if hi - lo <= tol.inner_root_tol * hi {
            break;
        }
        let denom = phi_hi - phi_lo;
        let mut x = if denom != 0.0 && denom.is_finite() {
            lo - phi_lo * (hi - lo) / denom
        } else {
            0.5 * (lo + hi)
        };
        if !(x > lo && x < hi) {
            x = 0.5 * (lo + hi);
        }
        let fx = eval_phi(x, &mut beta);
        root = x;
        if fx > 0.0 {
            lo = x;
            phi_lo = fx;
            if side == 1 {
                phi_hi *= 0.5;
            }
            side = 1;
        } else {
            hi = x;
            phi_hi = fx;
            if side == -1 {
                phi_lo *= 0.5;
            }
            side = -1;
        }
    }
    let final_rho = 0.5 * (lo + hi);
    if final_rho != root {
        eval_phi(final_rho, &mut beta);
    }
    store_scratch(warm, &beta, final_rho);
    beta
}

fn store_scratch(warm: Option<&mut ProxScratch>, beta: &[f64], rho: f64) {
    if let Some(s) = warm {
        s.beta.clear();
        s.beta.extend_from_slice(beta);
        s.rho = rho;
    }
}

fn prox_dispatch(
    b: &[f64],
    mu: f64,
    p: PNorm,
    tol: &ProxTolerances,
    warm: Option<&mut ProxScratch>,
) -> Vec<f64> {
    if mu == 0.0 || b.is_empty() {
        return b.to_vec();
    }
    // any p collapses to the scalar soft threshold in dimension one
    if b.len() == 1 {
        return vec![soft_threshold(b[0], mu)];
    }
    let q = p.dual();
    let dual_norm = p_norm_unchecked(b, q);
    if 2.0 * dual_norm <= mu {
        return vec![0.0; b.len()];
    }
    if p.is_inf() {
        // Moreau decomposition against the l1 ball of radius mu/2
        let proj = project_onto_l1_ball(b, 0.5 * mu);
        return b.iter().zip(&proj).map(|(x, pr)| x - pr).collect();
    }
    let pv = p.value();
    if pv == 1.0 {
        return b.iter().map(|&x| soft_threshold(x, mu)).collect();
    }
    if pv == 2.0 {
        let norm = p_norm_unchecked(b, p);
        let scale = (1.0 - mu / (2.0 * norm)).max(0.0);
        return b.iter().map(|&x| scale * x).collect();
    }
    let absb: Vec<f64> = b.iter().map(|x| x.abs()).collect();
    let nonneg = prox_general_nonneg(&absb, mu, pv, tol, warm);
    b.iter()
        .zip(&nonneg)
        .map(|(&x, &v)| if x < 0.0 { -v } else { v })
        .collect()
}

/// Internal prox without input validation (cold path).
pub(crate) fn prox_group_unchecked(b: &[f64], mu: f64, p: PNorm, tol: &ProxTolerances) -> Vec<f64> {
    prox_dispatch(b, mu, p, tol, None)
}

/// Prox of `mu * ||.||_p` at `b` under `||b - beta||_2^2 + mu ||beta||_p`.
///
/// Returns the zero vector exactly when `2 ||b||_q <= mu`.
pub fn prox_group(b: &[f64], mu: f64, p: PNorm, tol: &ProxTolerances) -> Result<Vec<f64>> {
    if !(mu >= 0.0) || !mu.is_finite() {
        return Err(Error::invalid(format!(
            "prox multiplier must be finite and >= 0, got {mu}"
        )));
    }
    if b.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("prox input contains a non-finite entry"));
    }
    tol.validate()?;
    Ok(prox_group_unchecked(b, mu, p, tol))
}

/// The bisection residual g~(mu) = sum_j ||prox(b_j, mu)||_p - kappa.
///
/// Continuous and non-increasing in mu; exposed for diagnostics and tests.
pub fn constraint_gap(
    b: &Coefficients,
    p: PNorm,
    kappa: f64,
    mu: f64,
    tol: &ProxTolerances,
) -> Result<f64> {
    if !(mu >= 0.0) {
        return Err(Error::invalid("mu must be >= 0"));
    }
    let values = b.values().as_slice().expect("contiguous");
    let mut total = 0.0;
    for r in b.partition().iter_ranges() {
        let prox = prox_group_unchecked(&values[r], mu, p, tol);
        total += p_norm_unchecked(&prox, p);
    }
    Ok(total - kappa)
}

/// Per-group scratch plus the last accepted multiplier, reused across the
/// many projections of one projected-gradient loop.
pub(crate) struct ProjectionCache {
    groups: Vec<ProxScratch>,
    last_mu: f64,
}

impl ProjectionCache {
    pub(crate) fn new(partition: &GroupPartition) -> Self {
        ProjectionCache {
            groups: vec![ProxScratch::empty(); partition.num_groups()],
            last_mu: 0.0,
        }
    }
}

pub(crate) struct ProjectionOutcome {
    pub values: Vec<f64>,
    pub mu: f64,
    pub outer_iterations: usize,
    pub constraint_active: bool,
}

/// Projection core operating on raw storage; used by the solver hot loop.
pub(crate) fn project_values(
    values: &[f64],
    partition: &GroupPartition,
    p: PNorm,
    kappa: f64,
    tol: &ProxTolerances,
    cache: &mut ProjectionCache,
) -> Result<ProjectionOutcome> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Internal("projection input is not finite".into()));
    }
    let mixed = crate::norms::mixed_norm_unchecked(values, partition, p);
    if mixed <= kappa {
        return Ok(ProjectionOutcome {
            values: values.to_vec(),
            mu: 0.0,
            outer_iterations: 0,
            constraint_active: false,
        });
    }
    let q = p.dual();
    let mu_max = 2.0
        * partition
            .iter_ranges()
            .map(|r| p_norm_unchecked(&values[r], q))
            .fold(0.0f64, f64::max);

    let eval = |mu: f64, cache: &mut ProjectionCache| -> (Vec<f64>, f64) {
        let mut out = vec![0.0f64; values.len()];
        let mut total = 0.0;
        for (j, r) in partition.iter_ranges().enumerate() {
            let prox = prox_dispatch(
                &values[r.clone()],
                mu,
                p,
                tol,
                Some(&mut cache.groups[j]),
            );
            total += p_norm_unchecked(&prox, p);
            out[r].copy_from_slice(&prox);
        }
        (out, total - kappa)
    };

    let mut lo = 0.0f64;
    let mut hi = mu_max;
    let mut evals = 0usize;
    // consecutive projections in one gradient loop have nearby multipliers:
    // try to confine the bisection to a window around the previous one
    // (two sign checks; the [0, mu_max] bracket stays the fallback)
    if cache.last_mu > 0.0 && cache.last_mu < mu_max {
        let probe_hi = (cache.last_mu * 4.0).min(mu_max);
        let (_, gap_hi) = eval(probe_hi, cache);
        evals += 1;
        if gap_hi > 0.0 {
            lo = probe_hi;
        } else {
            hi = probe_hi;
            let probe_lo = cache.last_mu * 0.25;
            let (_, gap_lo) = eval(probe_lo, cache);
            evals += 1;
            if gap_lo > 0.0 {
                lo = probe_lo;
            } else {
                hi = probe_lo;
            }
        }
    }
    let mut last: Option<Vec<f64>> = None;
    for k in evals..tol.max_outer_bisections {
        let mu = 0.5 * (lo + hi);
        let (mut beta, gap) = eval(mu, cache);
        // accept only from inside the ball: outputs stay feasible, so
        // re-projecting a projection is an exact identity
        if gap <= 0.0 && gap >= -tol.outer_kappa_tol {
            // land exactly on the kappa sphere: the leftover radial slack
            // (up to outer_kappa_tol) would otherwise feed first-order
            // noise into every objective comparison downstream
            let mixed_out = kappa + gap;
            if mixed_out > 1e-3 * kappa {
                let scale = kappa / mixed_out;
                for v in beta.iter_mut() {
                    *v *= scale;
                }
            }
            cache.last_mu = mu;
            return Ok(ProjectionOutcome {
                values: beta,
                mu,
                outer_iterations: k + 1,
                constraint_active: true,
            });
        }
        if gap > 0.0 {
            lo = mu;
        } else {
            hi = mu;
        }
        last = Some(beta);
    }
    // distinguish a broken bracket (impossible if the zero rule holds) from
    // a genuine iteration-budget failure
    let (_, gap_at_max) = eval(mu_max, cache);
    if gap_at_max > 0.0 {
        return Err(Error::Internal(format!(
            "mu bisection bracket failed: residual {gap_at_max} > 0 at mu_max {mu_max}"
        )));
    }
    let beta = last.expect("at least one bisection step");
    Err(Error::Convergence {
        message: format!(
            "mu bisection did not reach |gap| <= {} within {} steps",
            tol.outer_kappa_tol, tol.max_outer_bisections
        ),
        iterations: tol.max_outer_bisections,
        last: Some(Box::new(Coefficients::new(
            ndarray::Array1::from(beta),
            partition.clone(),
        )?)),
    })
}

/// Euclidean projection of `b` onto the mixed-norm ball
/// `{beta : sum_j ||beta_j||_p <= kappa}`.
///
/// Feasible inputs (including exact ties) come back unchanged with mu = 0;
/// otherwise mu is tuned by interval bisection until the mixed norm matches
/// kappa within `outer_kappa_tol`, approaching from inside the ball so the
/// output is always feasible.
pub fn project_l1p_ball(
    b: &Coefficients,
    p: PNorm,
    kappa: f64,
    tol: &ProxTolerances,
) -> Result<ProjectionReport> {
    if !(kappa > 0.0) || !kappa.is_finite() {
        return Err(Error::invalid(format!(
            "kappa must be positive and finite, got {kappa}"
        )));
    }
    tol.validate()?;
    let values = b.values().as_slice().expect("contiguous");
    if values.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("projection input contains a non-finite entry"));
    }
    let mut cache = ProjectionCache::new(b.partition());
    let out = project_values(values, b.partition(), p, kappa, tol, &mut cache)?;
    Ok(ProjectionReport {
        beta: Coefficients::new(ndarray::Array1::from(out.values), b.partition().clone())?,
        mu: out.mu,
        outer_iterations: out.outer_iterations,
        constraint_active: out.constraint_active,
    })
}
