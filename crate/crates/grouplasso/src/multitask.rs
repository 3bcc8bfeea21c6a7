//! Multi-task problem construction and the synthetic shared-sparsity study.
//!
//! m binary classification tasks over a common feature space are coupled
//! into one grouped problem: the coefficients of feature j across all tasks
//! form group j, so the mixed-norm constraint selects features jointly
//! while the block-diagonal design keeps the per-task losses separate.

use ndarray::{Array1, Array2};
use rand::seq::index::sample as sample_indices;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::glm::{map_labels_to_unit, Coefficients, GlmFamily, GroupedDesign};
use crate::norms::GroupPartition;
use crate::solver::{fit_active_set, FitConfig, FitResult};

/// One task's examples: rows of features and +-1 class labels.
#[derive(Clone, Debug)]
pub struct TaskData {
    x: Array2<f64>,
    y: Array1<f64>,
}

impl TaskData {
    pub fn new(x: Array2<f64>, y: Array1<f64>) -> Result<Self> {
        if x.nrows() == 0 {
            return Err(Error::invalid("task must contain at least one example"));
        }
        if x.nrows() != y.len() {
            return Err(Error::dims(format!(
                "task has {} rows but {} labels",
                x.nrows(),
                y.len()
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("task features contain a non-finite entry"));
        }
        if y.iter().any(|&v| v != 1.0 && v != -1.0) {
            return Err(Error::invalid("task labels must be +-1"));
        }
        Ok(TaskData { x, y })
    }

    pub fn x(&self) -> &Array2<f64> {
        &self.x
    }

    pub fn y(&self) -> &Array1<f64> {
        &self.y
    }

    pub fn num_examples(&self) -> usize {
        self.x.nrows()
    }
}

/// A set of tasks over a shared feature dimension.
#[derive(Clone, Debug)]
pub struct TaskCollection {
    tasks: Vec<TaskData>,
    dim: usize,
}

impl TaskCollection {
    pub fn new(tasks: Vec<TaskData>) -> Result<Self> {
        let dim = tasks
            .first()
            .map(|t| t.x.ncols())
            .ok_or_else(|| Error::invalid("task collection must contain at least one task"))?;
        if dim == 0 {
            return Err(Error::invalid("tasks must have at least one feature"));
        }
        if tasks.iter().any(|t| t.x.ncols() != dim) {
            return Err(Error::dims("all tasks must share the same feature dimension"));
        }
        Ok(TaskCollection { tasks, dim })
    }

    pub fn tasks(&self) -> &[TaskData] {
        &self.tasks
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_tasks(&self) -> usize {
        self.tasks.len()
    }

    pub fn total_examples(&self) -> usize {
        self.tasks.iter().map(|t| t.num_examples()).sum()
    }
}

/// The planted parameter matrix and supports behind a synthetic data set.
#[derive(Clone, Debug)]
pub struct GroundTruth {
    /// d x m parameter matrix; column k is task k's coefficient vector.
    pub coefficients: Array2<f64>,
    /// Union of the per-task supports (the relevant features).
    pub relevant: Vec<usize>,
    /// Per-task supports, each of the planted size, ascending.
    pub supports: Vec<Vec<usize>>,
}

/// Parameters of the synthetic shared-sparsity generator.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    pub seed: u64,
    /// Feature count d (= group count of the coupled problem).
    pub dim: usize,
    /// Task count m.
    pub tasks: usize,
    /// Examples generated per task; a `test_frac` share is held out.
    pub examples_per_task: usize,
    /// Fraction of features planted as relevant per task.
    pub relevant_frac: f64,
    /// Fraction of the per-task support shared by all tasks.
    pub share_frac: f64,
    /// Held-out fraction, drawn as a fresh i.i.d. sample of that size.
    pub test_frac: f64,
}

impl SynthSpec {
    /// Planted per-task support size.
    pub fn support_size(&self) -> usize {
        ((self.relevant_frac * self.dim as f64).round() as usize).max(1)
    }

    pub fn num_test(&self) -> usize {
        (self.test_frac * self.examples_per_task as f64).round() as usize
    }

    pub fn num_train(&self) -> usize {
        self.examples_per_task - self.num_test()
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.tasks == 0 {
            return Err(Error::invalid("dim and tasks must be positive"));
        }
        if !(self.relevant_frac > 0.0 && self.relevant_frac <= 1.0) {
            return Err(Error::invalid("relevant_frac must lie in (0, 1]"));
        }
        if !(self.share_frac > 0.0 && self.share_frac <= 1.0) {
            return Err(Error::invalid("share_frac must lie in (0, 1]"));
        }
        if !(self.test_frac > 0.0 && self.test_frac < 1.0) {
            return Err(Error::invalid("test_frac must lie in (0, 1)"));
        }
        if self.num_test() == 0 || self.num_train() == 0 {
            return Err(Error::invalid(
                "examples_per_task too small for the requested test_frac",
            ));
        }
        let v = self.support_size();
        if v > self.dim {
            return Err(Error::invalid("per-task support exceeds the feature count"));
        }
        let core = core_size(self.share_frac, v);
        if v - core > self.dim - core {
            return Err(Error::invalid(
                "off-core features cannot cover the non-shared support",
            ));
        }
        Ok(())
    }
}

fn core_size(share_frac: f64, support: usize) -> usize {
    ((share_frac * support as f64).round() as usize).min(support)
}

fn draw_normal_matrix(rng: &mut ChaCha20Rng, rows: usize, cols: usize) -> Array2<f64> {
    let mut m = Array2::zeros((rows, cols));
    for i in 0..rows {
        for j in 0..cols {
            m[[i, j]] = rng.sample(StandardNormal);
        }
    }
    m
}

/// Draws one task's examples: standard-normal features with labels
/// sign(beta . x); rows with an exact zero margin are redrawn.
fn draw_task(
    rng: &mut ChaCha20Rng,
    beta: &Array1<f64>,
    n: usize,
    dim: usize,
) -> (Array2<f64>, Array1<f64>) {
    let mut x = Array2::zeros((n, dim));
    let mut y = Array1::zeros(n);
    let mut row = vec![0.0f64; dim];
    for i in 0..n {
        loop {
            for v in row.iter_mut() {
                *v = rng.sample(StandardNormal);
            }
            let margin: f64 = row.iter().zip(beta.iter()).map(|(a, b)| a * b).sum();
            if margin != 0.0 {
                for (j, &v) in row.iter().enumerate() {
                    x[[i, j]] = v;
                }
                y[i] = if margin > 0.0 { 1.0 } else { -1.0 };
                break;
            }
        }
    }
    (x, y)
}

/// Generates the shared-sparsity study data: a common support core of size
/// `round(share_frac * support)` plus per-task remainders drawn uniformly
/// from the off-core features, so the planted overlap fraction is exact.
/// Identical spec (including seed) reproduces identical data bit for bit.
pub fn generate_synthetic(
    spec: &SynthSpec,
) -> Result<(TaskCollection, TaskCollection, GroundTruth)> {
    spec.validate()?;
    let mut rng = ChaCha20Rng::seed_from_u64(spec.seed);
    let d = spec.dim;
    let m = spec.tasks;
    let v = spec.support_size();
    let core = core_size(spec.share_frac, v);

    let mut core_features: Vec<usize> = sample_indices(&mut rng, d, core).into_vec();
    core_features.sort_unstable();
    let off_core: Vec<usize> = (0..d).filter(|f| !core_features.contains(f)).collect();

    let mut supports: Vec<Vec<usize>> = Vec::with_capacity(m);
    for _ in 0..m {
        let mut s = core_features.clone();
        if v > core {
            let extra = sample_indices(&mut rng, off_core.len(), v - core);
            s.extend(extra.iter().map(|i| off_core[i]));
        }
        s.sort_unstable();
        supports.push(s);
    }

    // dense draw first, then mask outside the supports
    let mut coefficients = draw_normal_matrix(&mut rng, d, m);
    for (k, support) in supports.iter().enumerate() {
        for i in 0..d {
            if support.binary_search(&i).is_err() {
                coefficients[[i, k]] = 0.0;
            }
        }
    }
    let mut relevant: Vec<usize> = supports.iter().flatten().copied().collect();
    relevant.sort_unstable();
    relevant.dedup();

    let n_train = spec.num_train();
    let n_test = spec.num_test();
    let mut train_tasks = Vec::with_capacity(m);
    for k in 0..m {
        let beta = coefficients.column(k).to_owned();
        let (x, y) = draw_task(&mut rng, &beta, n_train, d);
        train_tasks.push(TaskData::new(x, y)?);
    }
    let mut test_tasks = Vec::with_capacity(m);
    for k in 0..m {
        let beta = coefficients.column(k).to_owned();
        let (x, y) = draw_task(&mut rng, &beta, n_test, d);
        test_tasks.push(TaskData::new(x, y)?);
    }

    Ok((
        TaskCollection::new(train_tasks)?,
        TaskCollection::new(test_tasks)?,
        GroundTruth { coefficients, relevant, supports },
    ))
}

/// Stacks m tasks into one grouped design of dimension d*m: group j holds
/// feature j's coefficient for tasks 1..m, and task k's rows touch only
/// task k's coefficients, so the joint Bernoulli loss is the sum of the
/// per-task losses. Labels are mapped from +-1 to {0, 1} here.
pub fn build_multitask_problem(tasks: &TaskCollection) -> Result<GroupedDesign> {
    let d = tasks.dim();
    let m = tasks.num_tasks();
    let rows = tasks.total_examples();
    let mut x = Array2::zeros((rows, d * m));
    let mut y = Array1::zeros(rows);
    let mut row = 0usize;
    for (k, task) in tasks.tasks().iter().enumerate() {
        let mapped = map_labels_to_unit(task.y().as_slice().expect("contiguous"))?;
        for i in 0..task.num_examples() {
            for j in 0..d {
                x[[row, j * m + k]] = task.x()[[i, j]];
            }
            y[row] = mapped[i];
            row += 1;
        }
    }
    GroupedDesign::new(x, y, GroupPartition::uniform(d, m)?)
}

/// Reshapes a stacked solution of dimension d*m back into the d x m
/// parameter matrix.
pub fn unstack_coefficients(beta: &Coefficients, dim: usize, tasks: usize) -> Result<Array2<f64>> {
    if beta.values().len() != dim * tasks {
        return Err(Error::dims(format!(
            "stacked vector has {} entries, expected {}",
            beta.values().len(),
            dim * tasks
        )));
    }
    let mut out = Array2::zeros((dim, tasks));
    for j in 0..dim {
        for k in 0..tasks {
            out[[j, k]] = beta.values()[j * tasks + k];
        }
    }
    Ok(out)
}

/// Misclassification rates of sign(beta_k . x) against +-1 labels, per task
/// and averaged. sign(0) counts as +1.
pub fn evaluate_error(b_hat: &Array2<f64>, test: &TaskCollection) -> Result<(Vec<f64>, f64)> {
    if b_hat.nrows() != test.dim() || b_hat.ncols() != test.num_tasks() {
        return Err(Error::dims(format!(
            "parameter matrix is {}x{}, tasks need {}x{}",
            b_hat.nrows(),
            b_hat.ncols(),
            test.dim(),
            test.num_tasks()
        )));
    }
    let mut rates = Vec::with_capacity(test.num_tasks());
    for (k, task) in test.tasks().iter().enumerate() {
        if task.num_examples() == 0 {
            return Err(Error::invalid(format!("test task {k} is empty")));
        }
        let beta = b_hat.column(k);
        let margins = task.x().dot(&beta);
        let errors = margins
            .iter()
            .zip(task.y().iter())
            .filter(|(&margin, &label)| {
                let pred = if margin < 0.0 { -1.0 } else { 1.0 };
                pred != label
            })
            .count();
        rates.push(errors as f64 / task.num_examples() as f64);
    }
    let mean = rates.iter().sum::<f64>() / rates.len() as f64;
    Ok((rates, mean))
}

/// Fits the coupled group-lasso problem (p and kappa from `config`) and
/// returns the d x m estimate alongside the raw fit.
pub fn fit_multitask_group_lasso(
    tasks: &TaskCollection,
    config: &FitConfig,
) -> Result<(Array2<f64>, FitResult)> {
    let design = build_multitask_problem(tasks)?;
    let fit = fit_active_set(GlmFamily::Bernoulli, &design, config)?;
    let b_hat = unstack_coefficients(&fit.beta, tasks.dim(), tasks.num_tasks())?;
    Ok((b_hat, fit))
}

/// All tasks concatenated into one big task with size-one groups (the
/// plain-Lasso structure of the pooled baseline).
pub fn pooled_design(tasks: &TaskCollection) -> Result<GroupedDesign> {
    let d = tasks.dim();
    let rows = tasks.total_examples();
    let mut x = Array2::zeros((rows, d));
    let mut y = Array1::zeros(rows);
    let mut row = 0usize;
    for task in tasks.tasks() {
        let mapped = map_labels_to_unit(task.y().as_slice().expect("contiguous"))?;
        for i in 0..task.num_examples() {
            for j in 0..d {
                x[[row, j]] = task.x()[[i, j]];
            }
            y[row] = mapped[i];
            row += 1;
        }
    }
    GroupedDesign::new(x, y, GroupPartition::singletons(d)?)
}

/// One task as a size-one-groups logistic design.
pub fn single_task_design(task: &TaskData) -> Result<GroupedDesign> {
    let d = task.x().ncols();
    let y = map_labels_to_unit(task.y().as_slice().expect("contiguous"))?;
    GroupedDesign::new(task.x().clone(), y, GroupPartition::singletons(d)?)
}

/// Pools all tasks into one big task, fits a single l1-constrained logistic
/// model (size-one groups) and broadcasts it to every task.
pub fn pooled_baseline(
    tasks: &TaskCollection,
    config: &FitConfig,
) -> Result<(Array2<f64>, FitResult)> {
    let design = pooled_design(tasks)?;
    let fit = fit_active_set(GlmFamily::Bernoulli, &design, config)?;
    let d = tasks.dim();
    let mut b_hat = Array2::zeros((d, tasks.num_tasks()));
    for k in 0..tasks.num_tasks() {
        for j in 0..d {
            b_hat[[j, k]] = fit.beta.values()[j];
        }
    }
    Ok((b_hat, fit))
}

/// Independent l1-constrained logistic fits, one per task.
pub fn single_task_baseline(
    tasks: &TaskCollection,
    config: &FitConfig,
) -> Result<(Array2<f64>, Vec<FitResult>)> {
    let d = tasks.dim();
    let mut b_hat = Array2::zeros((d, tasks.num_tasks()));
    let mut fits = Vec::with_capacity(tasks.num_tasks());
    for (k, task) in tasks.tasks().iter().enumerate() {
        let design = single_task_design(task)?;
        let fit = fit_active_set(GlmFamily::Bernoulli, &design, config)?;
        for j in 0..d {
            b_hat[[j, k]] = fit.beta.values()[j];
        }
        fits.push(fit);
    }
    Ok((b_hat, fits))
}

/// Splits every task's examples by index: the first part keeps
/// `1 - holdout_frac` of the rows, the second the rest. The examples are
/// i.i.d. by construction, so an index split is a valid holdout.
pub fn split_tasks(
    tasks: &TaskCollection,
    holdout_frac: f64,
) -> Result<(TaskCollection, TaskCollection)> {
    if !(holdout_frac > 0.0 && holdout_frac < 1.0) {
        return Err(Error::invalid("holdout fraction must lie in (0, 1)"));
    }
    let mut keep = Vec::with_capacity(tasks.num_tasks());
    let mut hold = Vec::with_capacity(tasks.num_tasks());
    for task in tasks.tasks() {
        let n = task.num_examples();
        let n_hold = ((holdout_frac * n as f64).round() as usize).clamp(1, n.saturating_sub(1));
        let n_keep = n - n_hold;
        if n_keep == 0 {
            return Err(Error::invalid("not enough examples to split"));
        }
        let x = task.x();
        let y = task.y();
        keep.push(TaskData::new(
            x.slice(ndarray::s![..n_keep, ..]).to_owned(),
            y.slice(ndarray::s![..n_keep]).to_owned(),
        )?);
        hold.push(TaskData::new(
            x.slice(ndarray::s![n_keep.., ..]).to_owned(),
            y.slice(ndarray::s![n_keep..]).to_owned(),
        )?);
    }
    Ok((TaskCollection::new(keep)?, TaskCollection::new(hold)?))
}
