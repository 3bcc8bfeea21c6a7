//! Solver-level contract tests: the active-set algorithm against the
//! full-set projected-gradient reference, the Step D diagnostics, and the
//! regularization path.

use grouplasso::glm::{Coefficients, GlmFamily, GroupedDesign};
use grouplasso::norms::{GroupPartition, PNorm};
use grouplasso::oracle::{full_set_projected_gradient, OracleBudget};
use grouplasso::solver::{
    check_completeness, check_kkt, check_uniqueness, fit_active_set, projected_gradient_restricted,
    regularization_path, FitConfig,
};
use grouplasso::multitask::{build_multitask_problem, generate_synthetic, SynthSpec};
use ndarray::{Array1, Array2};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

fn normal_matrix(rng: &mut ChaCha20Rng, n: usize, d: usize, scale: f64) -> Array2<f64> {
    let mut x = Array2::zeros((n, d));
    for i in 0..n {
        for j in 0..d {
            let v: f64 = rng.sample(StandardNormal);
            x[[i, j]] = v * scale;
        }
    }
    x
}

fn normal_vector(rng: &mut ChaCha20Rng, n: usize) -> Array1<f64> {
    Array1::from_iter((0..n).map(|_| rng.sample::<f64, _>(StandardNormal)))
}

/// Random instance with rows scaled to keep the curvature moderate.
fn random_design(
    seed: u64,
    n: usize,
    sizes: Vec<usize>,
    family: GlmFamily,
) -> (GroupedDesign, ChaCha20Rng) {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let part = GroupPartition::new(sizes).unwrap();
    let d = part.total_dim();
    let x = normal_matrix(&mut rng, n, d, 1.0 / (n as f64).sqrt());
    let y = match family {
        GlmFamily::Gaussian => normal_vector(&mut rng, n),
        GlmFamily::Bernoulli => {
            let beta = normal_vector(&mut rng, d);
            let margins = x.dot(&beta);
            Array1::from_iter(margins.iter().map(|&m| if m > 0.0 { 1.0 } else { 0.0 }))
        }
    };
    (GroupedDesign::new(x, y, part).unwrap(), rng)
}

fn tight_config(kappa: f64, p: PNorm) -> FitConfig {
    let mut cfg = FitConfig::new(kappa, p);
    cfg.inner_objective_tol = 1e-12;
    cfg.max_inner_iterations = 2_000_000;
    cfg
}

#[test]
fn single_relevant_group_converges_in_one_outer_iteration() {
    // identity design, response supported on group 1's coordinates only:
    // no other group can violate the Lagrangian condition
    let part = GroupPartition::new(vec![2, 2, 2]).unwrap();
    let y = Array1::from(vec![1.0, 2.0, 0.0, 0.0, 0.0, 0.0]);
    let design = GroupedDesign::new(Array2::eye(6), y, part).unwrap();
    let cfg = tight_config(0.5, PNorm::two());
    let fit = fit_active_set(GlmFamily::Gaussian, &design, &cfg).unwrap();
    assert_eq!(fit.active_set, vec![0]);
    assert_eq!(fit.outer_iterations, 1);
    assert!(fit.constraint_active);
}

#[test]
fn active_set_matches_full_set_oracle_objective() {
    let mut budget = OracleBudget::default();
    budget.tol = 1e-13;
    let p = PNorm::two();
    for seed in [1u64, 2, 3] {
        let (design, _) = random_design(seed, 40, vec![3; 8], GlmFamily::Gaussian);
        let cfg = tight_config(1.0, p);
        let fit = fit_active_set(GlmFamily::Gaussian, &design, &cfg).unwrap();
        assert!(fit.constraint_active, "seed {seed}: constraint inactive");
        let oracle = full_set_projected_gradient(GlmFamily::Gaussian, &design, 1.0, p, &budget)
            .unwrap();
        let oracle_obj =
            grouplasso::glm::negative_log_likelihood(GlmFamily::Gaussian, &design, &oracle)
                .unwrap();
        let gap = (fit.objective - oracle_obj).abs();
        assert!(
            gap <= 1e-6 * (1.0 + oracle_obj.abs()),
            "seed {seed}: objective gap {gap}"
        );
    }
}

#[test]
fn restricted_solver_is_a_fixed_point_at_zero_gradient() {
    // gaussian with y = X beta0 and beta0 feasible: gradient vanishes there
    let part = GroupPartition::new(vec![2, 2]).unwrap();
    let x = Array2::eye(4);
    let beta0 = Array1::from(vec![0.3, -0.1, 0.0, 0.0]);
    let y = x.dot(&beta0);
    let design = GroupedDesign::new(x, y, part.clone()).unwrap();
    let cfg = tight_config(2.0, PNorm::two());
    let start = Coefficients::new(beta0.clone(), part).unwrap();
    let out = projected_gradient_restricted(GlmFamily::Gaussian, &design, &start, &[0], &cfg)
        .unwrap();
    assert_eq!(out.values(), &beta0);
}

#[test]
fn restricted_solver_matches_ball_projection_on_identity_design() {
    // single active group, gaussian, X = I: the restricted optimum is the
    // projection of y onto the constraint set of that group
    let part = GroupPartition::new(vec![3, 3]).unwrap();
    let y = Array1::from(vec![2.0, -1.0, 0.5, 0.0, 0.0, 0.0]);
    let design = GroupedDesign::new(Array2::eye(6), y.clone(), part.clone()).unwrap();
    for p in [PNorm::one(), PNorm::new(1.5).unwrap(), PNorm::two(), PNorm::inf()] {
        let cfg = tight_config(1.2, p);
        let start = Coefficients::zeros(part.clone());
        let out =
            projected_gradient_restricted(GlmFamily::Bernoulli, &design, &start, &[0], &cfg);
        // bernoulli would need {0,1} responses; use gaussian here
        assert!(out.is_err() || out.is_ok());
        let out = projected_gradient_restricted(GlmFamily::Gaussian, &design, &start, &[0], &cfg)
            .unwrap();
        let target = grouplasso::projection::project_l1p_ball(
            &Coefficients::new(
                Array1::from(vec![2.0, -1.0, 0.5]),
                GroupPartition::new(vec![3]).unwrap(),
            )
            .unwrap(),
            p,
            1.2,
            &cfg.projection,
        )
        .unwrap();
        for (got, want) in out.values().iter().take(3).zip(target.beta.values()) {
            assert!(
                (got - want).abs() <= 1e-6,
                "p={p}: {got} vs {want}"
            );
        }
        for got in out.values().iter().skip(3) {
            assert_eq!(*got, 0.0);
        }
    }
}

#[test]
fn restricted_solver_never_increases_the_objective() {
    let (design, _) = random_design(11, 30, vec![2; 6], GlmFamily::Bernoulli);
    let cfg = tight_config(0.8, PNorm::new(1.5).unwrap());
    let start = Coefficients::zeros(design.partition().clone());
    let obj0 =
        grouplasso::glm::negative_log_likelihood(GlmFamily::Bernoulli, &design, &start).unwrap();
    let out =
        projected_gradient_restricted(GlmFamily::Bernoulli, &design, &start, &[0, 1, 2], &cfg)
            .unwrap();
    let obj1 =
        grouplasso::glm::negative_log_likelihood(GlmFamily::Bernoulli, &design, &out).unwrap();
    assert!(obj1 <= obj0 + 1e-12);
}

#[test]
fn restricted_solver_rejects_bad_preconditions() {
    let (design, _) = random_design(5, 20, vec![2; 4], GlmFamily::Gaussian);
    let cfg = tight_config(1.0, PNorm::two());
    // nonzero coordinates outside the active set
    let mut values = Array1::zeros(8);
    values[6] = 0.5;
    let start = Coefficients::new(values, design.partition().clone()).unwrap();
    assert!(
        projected_gradient_restricted(GlmFamily::Gaussian, &design, &start, &[0], &cfg).is_err()
    );
    // empty active set
    let start = Coefficients::zeros(design.partition().clone());
    assert!(projected_gradient_restricted(GlmFamily::Gaussian, &design, &start, &[], &cfg).is_err());
}

#[test]
fn kkt_check_fails_at_zero_and_at_perturbed_solutions() {
    let (design, _) = random_design(21, 30, vec![2; 5], GlmFamily::Gaussian);
    let cfg = tight_config(0.8, PNorm::two());

    // all-zero with a forced-active constraint: gradient is nonzero
    let zero = Coefficients::zeros(design.partition().clone());
    let report = check_kkt(GlmFamily::Gaussian, &design, &zero, &cfg).unwrap();
    assert!(!report.pass);

    let fit = fit_active_set(GlmFamily::Gaussian, &design, &cfg).unwrap();
    let report = check_kkt(GlmFamily::Gaussian, &design, &fit.beta, &cfg).unwrap();
    assert!(report.pass, "converged fit must satisfy the KKT conditions");

    // perturbing one active coordinate breaks stationarity
    let mut perturbed = fit.beta.clone();
    let j = fit.active_set[0];
    let idx = design.partition().range(j).start;
    perturbed.values_mut()[idx] += 0.1;
    let report = check_kkt(GlmFamily::Gaussian, &design, &perturbed, &cfg).unwrap();
    assert!(!report.pass);
}

#[test]
fn duplicated_group_shows_up_in_the_completeness_gap() {
    // group 1 is an exact copy of group 0: their gradients always agree, so
    // whichever one is active, the twin sits in B as well
    let mut rng = ChaCha20Rng::seed_from_u64(42);
    let n = 24;
    let base = normal_matrix(&mut rng, n, 2, 1.0 / (n as f64).sqrt());
    let other = normal_matrix(&mut rng, n, 2, 1.0 / (n as f64).sqrt());
    let mut x = Array2::zeros((n, 6));
    for i in 0..n {
        for j in 0..2 {
            x[[i, j]] = base[[i, j]];
            x[[i, 2 + j]] = base[[i, j]];
            x[[i, 4 + j]] = other[[i, j]];
        }
    }
    let y = normal_vector(&mut rng, n);
    let part = GroupPartition::new(vec![2, 2, 2]).unwrap();
    let design = GroupedDesign::new(x, y, part).unwrap();
    let cfg = tight_config(0.7, PNorm::two());
    let fit = fit_active_set(GlmFamily::Gaussian, &design, &cfg).unwrap();
    assert!(fit.constraint_active);
    assert!(!fit.complete, "duplicated design must be flagged incomplete");
    let (bset, complete) = check_completeness(GlmFamily::Gaussian, &design, &fit, &cfg).unwrap();
    assert!(!complete);
    let twin: Vec<usize> = bset
        .iter()
        .copied()
        .filter(|j| !fit.active_set.contains(j))
        .collect();
    assert!(
        twin.contains(&0) || twin.contains(&1),
        "twin group missing from B \\ A: bset {bset:?}, active {:?}",
        fit.active_set
    );
}

#[test]
fn generic_instances_are_complete_and_certified_unique() {
    for seed in [3u64, 17, 91] {
        let (design, _) = random_design(seed, 40, vec![2; 6], GlmFamily::Gaussian);
        let cfg = tight_config(0.8, PNorm::two());
        let fit = fit_active_set(GlmFamily::Gaussian, &design, &cfg).unwrap();
        assert!(fit.constraint_active);
        assert!(fit.complete, "seed {seed}: generic instance incomplete");
        // d = 12 <= n = 40 and complete
        assert!(fit.unique_certified);
        assert!(check_uniqueness(&design, &fit));
    }
}

#[test]
fn uniqueness_flag_follows_the_column_count() {
    // complete with s <= n: certified. Incomplete: not certified.
    let (design, _) = random_design(8, 30, vec![2; 5], GlmFamily::Gaussian);
    let cfg = tight_config(0.6, PNorm::two());
    let fit = fit_active_set(GlmFamily::Gaussian, &design, &cfg).unwrap();
    assert_eq!(fit.unique_certified, fit.complete && {
        let s: usize = fit
            .active_set
            .iter()
            .map(|&j| design.partition().sizes()[j])
            .sum();
        s <= design.num_rows()
    });
    let mut incomplete = fit.clone();
    incomplete.complete = false;
    assert!(!check_uniqueness(&design, &incomplete));
}

#[test]
fn multi_start_agreement_on_unique_instances() {
    let (design, _) = random_design(33, 50, vec![2; 6], GlmFamily::Gaussian);
    let cfg = tight_config(0.8, PNorm::two());
    let reference = fit_active_set(GlmFamily::Gaussian, &design, &cfg).unwrap();
    assert!(reference.unique_certified);
    for j0 in [0usize, 2, 3, 4, 5] {
        let mut cfg_j = cfg.clone();
        cfg_j.initial_group = Some(j0);
        let fit = fit_active_set(GlmFamily::Gaussian, &design, &cfg_j).unwrap();
        let dist = fit
            .beta
            .values()
            .iter()
            .zip(reference.beta.values())
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(dist <= 1e-5, "start {j0}: solutions differ by {dist}");
    }
}

#[test]
fn l11_matches_flattened_plain_lasso() {
    let (design, _) = random_design(55, 30, vec![3; 4], GlmFamily::Gaussian);
    let cfg = tight_config(0.9, PNorm::one());
    let grouped = fit_active_set(GlmFamily::Gaussian, &design, &cfg).unwrap();

    // same data, every coordinate its own group
    let flat_part = GroupPartition::singletons(design.dim()).unwrap();
    let flat_design =
        GroupedDesign::new(design.x().clone(), design.y().clone(), flat_part).unwrap();
    let flat = fit_active_set(GlmFamily::Gaussian, &flat_design, &cfg).unwrap();
    let gap = (grouped.objective - flat.objective).abs();
    assert!(
        gap <= 1e-6 * (1.0 + flat.objective.abs()),
        "l1,1 vs plain lasso objective gap {gap}"
    );
}

#[test]
fn constraint_activity_matches_the_flag() {
    for (seed, kappa) in [(2u64, 0.5), (4, 1.5), (6, 50.0)] {
        let (design, _) = random_design(seed, 25, vec![2; 5], GlmFamily::Gaussian);
        let cfg = tight_config(kappa, PNorm::new(1.5).unwrap());
        let fit = fit_active_set(GlmFamily::Gaussian, &design, &cfg).unwrap();
        let mixed = fit.beta.mixed_norm(cfg.p);
        if fit.constraint_active {
            assert!((mixed - kappa).abs() <= 1e-6, "|{mixed} - {kappa}| > 1e-6");
        } else {
            assert!(mixed < kappa - 1e-6);
        }
    }
}

#[test]
fn huge_kappa_reports_inactive_constraint() {
    // well-posed least squares whose unconstrained optimum is tiny
    let part = GroupPartition::new(vec![2, 2]).unwrap();
    let y = Array1::from(vec![0.1, -0.05, 0.02, 0.0]);
    let design = GroupedDesign::new(Array2::eye(4), y, part).unwrap();
    let cfg = tight_config(100.0, PNorm::two());
    let fit = fit_active_set(GlmFamily::Gaussian, &design, &cfg).unwrap();
    assert!(!fit.constraint_active);
    // uniqueness then reduces to d <= n
    assert!(fit.unique_certified);
    assert!(fit.objective <= 1e-12);
}

#[test]
fn path_warm_starts_and_flags_activity() {
    let (design, _) = random_design(77, 30, vec![2; 5], GlmFamily::Gaussian);
    let mut cfg = tight_config(1.0, PNorm::two());
    cfg.inner_objective_tol = 1e-11;
    let kappas = [50.0, 2.0, 1.0, 1.0, 0.5, 0.1];
    let fits = regularization_path(GlmFamily::Gaussian, &design, &kappas, &cfg).unwrap();
    assert_eq!(fits.len(), kappas.len());
    let fits: Vec<_> = fits.into_iter().map(|f| f.unwrap()).collect();
    // far end of the grid is beyond kappa0
    assert!(!fits[0].constraint_active);
    // the small-kappa end must be active
    assert!(fits[5].constraint_active);
    // identical consecutive kappas reproduce the same solution
    let drift = fits[2]
        .beta
        .values()
        .iter()
        .zip(fits[3].beta.values())
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    assert!(drift <= 1e-7, "repeated kappa drifted by {drift}");
    assert_eq!(fits[2].active_set, fits[3].active_set);
    // shrinking budget shrinks the solution norm
    let n5 = fits[5].beta.mixed_norm(cfg.p);
    let n4 = fits[4].beta.mixed_norm(cfg.p);
    assert!(n5 <= n4 + 1e-8);
}

#[test]
fn path_rejects_increasing_grids() {
    let (design, _) = random_design(7, 20, vec![2; 4], GlmFamily::Gaussian);
    let cfg = tight_config(1.0, PNorm::two());
    assert!(regularization_path(GlmFamily::Gaussian, &design, &[1.0, 2.0], &cfg).is_err());
    assert!(regularization_path(GlmFamily::Gaussian, &design, &[], &cfg).is_err());
}

#[test]
fn multitask_instance_passes_kkt_for_all_exponents() {
    let spec = SynthSpec {
        seed: 5,
        dim: 20,
        tasks: 4,
        examples_per_task: 45,
        relevant_frac: 0.1,
        share_frac: 1.0,
        test_frac: 1.0 / 3.0,
    };
    let (train, _, _) = generate_synthetic(&spec).unwrap();
    let design = build_multitask_problem(&train).unwrap();
    for p in [PNorm::new(1.5).unwrap(), PNorm::two(), PNorm::new(3.0).unwrap(), PNorm::inf()] {
        let mut cfg = tight_config(3.0, p);
        cfg.inner_objective_tol = 1e-11;
        let fit = fit_active_set(GlmFamily::Bernoulli, &design, &cfg).unwrap();
        assert!(fit.constraint_active, "p={p}: inactive");
        let report = check_kkt(GlmFamily::Bernoulli, &design, &fit.beta, &cfg).unwrap();
        assert!(report.pass, "p={p}: KKT failed");
    }
}

#[test]
fn outer_loop_objective_trace_is_decreasing() {
    let (design, _) = random_design(13, 40, vec![2; 8], GlmFamily::Gaussian);
    let cfg = tight_config(1.2, PNorm::two());
    let fit = fit_active_set(GlmFamily::Gaussian, &design, &cfg).unwrap();
    for w in fit.objective_trace.windows(2) {
        assert!(w[1] <= w[0] + 1e-9, "outer objective increased: {w:?}");
    }
    assert!(fit.outer_iterations <= design.partition().num_groups());
}
