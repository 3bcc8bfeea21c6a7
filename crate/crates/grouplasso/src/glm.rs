//! Exponential-family negative log-likelihoods with canonical links.
//!
//! Two families cover every experiment in this crate: gaussian with the
//! identity link and bernoulli with the logit link. The scale parameter is
//! fixed to 1 and the response-only term of the log-density is dropped, so
//! reported objectives are defined up to an additive constant.

use ndarray::{Array1, Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::norms::{p_norm_unchecked, GroupPartition, PNorm};

/// Exponential-family model selector.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GlmFamily {
    Gaussian,
    Bernoulli,
}

impl GlmFamily {
    /// Log-partition b(nu). Convex and twice differentiable on all reals.
    pub fn log_partition(self, nu: f64) -> f64 {
        match self {
            GlmFamily::Gaussian => 0.5 * nu * nu,
            // log(1 + e^nu) without overflow for large |nu|
            GlmFamily::Bernoulli => nu.max(0.0) + (-nu.abs()).exp().ln_1p(),
        }
    }

    /// Inverse canonical link, equal to b'(nu).
    pub fn inverse_link(self, nu: f64) -> f64 {
        match self {
            GlmFamily::Gaussian => nu,
            GlmFamily::Bernoulli => {
                if nu >= 0.0 {
                    1.0 / (1.0 + (-nu).exp())
                } else {
                    let e = nu.exp();
                    e / (1.0 + e)
                }
            }
        }
    }

    /// Validates a response vector for this family. Bernoulli responses must
    /// already be coded in {0, 1}; use [`map_labels_to_unit`] at ingestion
    /// for +-1 coded data.
    pub fn validate_response(self, y: ArrayView1<'_, f64>) -> Result<()> {
        match self {
            GlmFamily::Gaussian => Ok(()),
            GlmFamily::Bernoulli => {
                if y.iter().all(|&v| v == 0.0 || v == 1.0) {
                    Ok(())
                } else {
                    Err(Error::invalid(
                        "bernoulli responses must be coded in {0, 1} (map +-1 labels first)",
                    ))
                }
            }
        }
    }
}

/// Maps +-1 class labels to {0, 1}; values already in {0, 1} pass through.
pub fn map_labels_to_unit(y: &[f64]) -> Result<Array1<f64>> {
    y.iter()
        .map(|&v| {
            if v == 1.0 {
                Ok(1.0)
            } else if v == -1.0 || v == 0.0 {
                Ok(0.0)
            } else {
                Err(Error::invalid(format!(
                    "class label must be one of -1, 0, 1; got {v}"
                )))
            }
        })
        .collect::<Result<Vec<f64>>>()
        .map(Array1::from_vec)
}

/// A design matrix with an explicit column partition and its response.
#[derive(Clone, Debug)]
pub struct GroupedDesign {
    x: Array2<f64>,
    y: Array1<f64>,
    partition: GroupPartition,
}

impl GroupedDesign {
    pub fn new(x: Array2<f64>, y: Array1<f64>, partition: GroupPartition) -> Result<Self> {
        let (n, d) = x.dim();
        if n == 0 || d == 0 {
            return Err(Error::invalid("design matrix must be non-empty"));
        }
        if d != partition.total_dim() {
            return Err(Error::dims(format!(
                "design has {d} columns, partition covers {}",
                partition.total_dim()
            )));
        }
        if y.len() != n {
            return Err(Error::dims(format!(
                "design has {n} rows, response has {} entries",
                y.len()
            )));
        }
        if x.iter().any(|v| !v.is_finite()) || y.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("design or response contains a non-finite entry"));
        }
        Ok(GroupedDesign { x, y, partition })
    }

    pub fn x(&self) -> &Array2<f64> {
        &self.x
    }

    pub fn y(&self) -> &Array1<f64> {
        &self.y
    }

    pub fn partition(&self) -> &GroupPartition {
        &self.partition
    }

    pub fn num_rows(&self) -> usize {
        self.x.nrows()
    }

    pub fn dim(&self) -> usize {
        self.x.ncols()
    }
}

/// A flat parameter vector with per-group views defined by its partition.
#[derive(Clone, Debug, PartialEq)]
pub struct Coefficients {
    values: Array1<f64>,
    partition: GroupPartition,
}

impl Coefficients {
    pub fn new(values: Array1<f64>, partition: GroupPartition) -> Result<Self> {
        if values.len() != partition.total_dim() {
            return Err(Error::dims(format!(
                "coefficient vector has length {}, partition covers {}",
                values.len(),
                partition.total_dim()
            )));
        }
        Ok(Coefficients { values, partition })
    }

    pub fn zeros(partition: GroupPartition) -> Self {
        let values = Array1::zeros(partition.total_dim());
        Coefficients { values, partition }
    }

    pub fn values(&self) -> &Array1<f64> {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut Array1<f64> {
        &mut self.values
    }

    pub fn into_values(self) -> Array1<f64> {
        self.values
    }

    pub fn partition(&self) -> &GroupPartition {
        &self.partition
    }

    pub fn group(&self, j: usize) -> &[f64] {
        let r = self.partition.range(j);
        &self.values.as_slice().expect("contiguous")[r]
    }

    /// Sum over groups of the per-group lp norm.
    pub fn mixed_norm(&self, p: PNorm) -> f64 {
        crate::norms::mixed_norm_unchecked(
            self.values.as_slice().expect("contiguous"),
            &self.partition,
            p,
        )
    }

    pub fn group_norm(&self, j: usize, p: PNorm) -> f64 {
        p_norm_unchecked(self.group(j), p)
    }
}

/// Negative log-likelihood sum_i [b(nu_i) - y_i nu_i] with nu = X beta.
pub fn negative_log_likelihood(
    family: GlmFamily,
    design: &GroupedDesign,
    beta: &Coefficients,
) -> Result<f64> {
    if beta.values().len() != design.dim() {
        return Err(Error::dims("coefficients do not match design columns"));
    }
    let nu = design.x().dot(beta.values());
    Ok(nll_from_nu(family, design.y().view(), nu.view()))
}

pub(crate) fn nll_from_nu(family: GlmFamily, y: ArrayView1<'_, f64>, nu: ArrayView1<'_, f64>) -> f64 {
    nu.iter()
        .zip(y.iter())
        .map(|(&nu_i, &y_i)| family.log_partition(nu_i) - y_i * nu_i)
        .sum()
}

/// Gradient of the negative log-likelihood in the linear predictor:
/// component i is eta^{-1}(nu_i) - y_i.
pub fn grad_nu(
    family: GlmFamily,
    y: ArrayView1<'_, f64>,
    nu: ArrayView1<'_, f64>,
) -> Result<Array1<f64>> {
    if y.len() != nu.len() {
        return Err(Error::dims(format!(
            "response has {} entries, predictor has {}",
            y.len(),
            nu.len()
        )));
    }
    Ok(grad_nu_unchecked(family, y, nu))
}

pub(crate) fn grad_nu_unchecked(
    family: GlmFamily,
    y: ArrayView1<'_, f64>,
    nu: ArrayView1<'_, f64>,
) -> Array1<f64> {
    Array1::from_iter(
        nu.iter()
            .zip(y.iter())
            .map(|(&nu_i, &y_i)| family.inverse_link(nu_i) - y_i),
    )
}

/// Gradient in beta: X^T (eta^{-1}(X beta) - y).
pub fn grad_beta(
    family: GlmFamily,
    design: &GroupedDesign,
    beta: &Coefficients,
) -> Result<Array1<f64>> {
    if beta.values().len() != design.dim() {
        return Err(Error::dims("coefficients do not match design columns"));
    }
    let nu = design.x().dot(beta.values());
    let r = grad_nu_unchecked(family, design.y().view(), nu.view());
    Ok(design.x().t().dot(&r))
}

/// The beta-gradient split into per-group slices h_j = X_j^T grad_nu.
pub fn group_gradients(
    family: GlmFamily,
    design: &GroupedDesign,
    beta: &Coefficients,
) -> Result<Vec<Array1<f64>>> {
    let h = grad_beta(family, design, beta)?;
    let h = h.as_slice().expect("contiguous");
    Ok(design
        .partition()
        .iter_ranges()
        .map(|r| Array1::from(h[r].to_vec()))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use proptest::prelude::*;

    fn identity_design(y: Array1<f64>) -> GroupedDesign {
        let n = y.len();
        let part = GroupPartition::singletons(n).unwrap();
        GroupedDesign::new(Array2::eye(n), y, part).unwrap()
    }

    use ndarray::Array2;

    #[test]
    fn nll_gaussian_zero_at_origin() {
        let design = identity_design(array![0.0, 0.0]);
        let beta = Coefficients::zeros(design.partition().clone());
        assert_eq!(
            negative_log_likelihood(GlmFamily::Gaussian, &design, &beta).unwrap(),
            0.0
        );
    }

    #[test]
    fn nll_bernoulli_log2_at_origin() {
        let design = identity_design(array![1.0]);
        let beta = Coefficients::zeros(design.partition().clone());
        let got = negative_log_likelihood(GlmFamily::Bernoulli, &design, &beta).unwrap();
        assert_abs_diff_eq!(got, 2f64.ln(), epsilon = 1e-15);
    }

    #[test]
    fn nll_bernoulli_direct_evaluation() {
        let design = identity_design(array![1.0]);
        let beta = Coefficients::new(array![2.0], design.partition().clone()).unwrap();
        let got = negative_log_likelihood(GlmFamily::Bernoulli, &design, &beta).unwrap();
        let oracle = (1.0 + 2f64.exp()).ln() - 2.0;
        assert_abs_diff_eq!(got, oracle, epsilon = 1e-15);
        assert_abs_diff_eq!(got, 0.126928011042972, epsilon = 1e-12);
    }

    #[test]
    fn grad_nu_residual_zero() {
        let y = array![1.0, 2.0];
        let nu = array![1.0, 2.0];
        let g = grad_nu(GlmFamily::Gaussian, y.view(), nu.view()).unwrap();
        assert_abs_diff_eq!(g[0], 0.0);
        assert_abs_diff_eq!(g[1], 0.0);
    }

    #[test]
    fn grad_nu_bernoulli_values() {
        let g = grad_nu(GlmFamily::Bernoulli, array![1.0].view(), array![0.0].view()).unwrap();
        assert_abs_diff_eq!(g[0], -0.5, epsilon = 1e-15);

        let g = grad_nu(GlmFamily::Bernoulli, array![0.0].view(), array![2.0].view()).unwrap();
        let oracle = 2f64.exp() / (1.0 + 2f64.exp());
        assert_abs_diff_eq!(g[0], oracle, epsilon = 1e-15);
        assert_abs_diff_eq!(g[0], 0.880797077977882, epsilon = 1e-12);
    }

    #[test]
    fn grad_nu_length_mismatch() {
        assert!(grad_nu(GlmFamily::Gaussian, array![1.0].view(), array![1.0, 2.0].view()).is_err());
    }

    #[test]
    fn grad_beta_identity_design() {
        let design = identity_design(array![1.0, 2.0]);
        let beta = Coefficients::zeros(design.partition().clone());
        let g = grad_beta(GlmFamily::Gaussian, &design, &beta).unwrap();
        assert_abs_diff_eq!(g[0], -1.0);
        assert_abs_diff_eq!(g[1], -2.0);
    }

    #[test]
    fn grad_beta_zero_at_least_squares_solution() {
        // square invertible X, beta = X^{-1} y
        let x = array![[2.0, 1.0], [0.5, 3.0]];
        let y = array![1.0, 2.0];
        // solve 2x2 system by hand
        let det = 2.0 * 3.0 - 1.0 * 0.5;
        let b = array![(3.0 * 1.0 - 1.0 * 2.0) / det, (2.0 * 2.0 - 0.5 * 1.0) / det];
        let part = GroupPartition::singletons(2).unwrap();
        let design = GroupedDesign::new(x, y, part.clone()).unwrap();
        let beta = Coefficients::new(b, part).unwrap();
        let g = grad_beta(GlmFamily::Gaussian, &design, &beta).unwrap();
        assert_abs_diff_eq!(g[0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(g[1], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn group_gradients_concatenate_to_grad_beta() {
        let x = array![
            [1.0, -0.5, 0.2, 0.0],
            [0.3, 2.0, -1.0, 0.7],
            [0.0, 0.4, 0.9, -1.2]
        ];
        let y = array![1.0, 0.0, 1.0];
        let part = GroupPartition::new(vec![2, 2]).unwrap();
        let design = GroupedDesign::new(x, y, part.clone()).unwrap();
        let beta = Coefficients::new(array![0.1, -0.2, 0.3, 0.4], part).unwrap();
        let flat = grad_beta(GlmFamily::Bernoulli, &design, &beta).unwrap();
        let groups = group_gradients(GlmFamily::Bernoulli, &design, &beta).unwrap();
        let cat: Vec<f64> = groups.iter().flat_map(|g| g.iter().copied()).collect();
        for (a, b) in flat.iter().zip(&cat) {
            assert_abs_diff_eq!(a, b);
        }
    }

    #[test]
    fn zero_column_group_has_zero_gradient() {
        let x = array![[1.0, 0.0], [2.0, 0.0]];
        let y = array![1.0, 1.0];
        let part = GroupPartition::singletons(2).unwrap();
        let design = GroupedDesign::new(x, y, part.clone()).unwrap();
        let beta = Coefficients::new(array![0.5, 0.3], part).unwrap();
        let groups = group_gradients(GlmFamily::Gaussian, &design, &beta).unwrap();
        assert_eq!(groups[1][0], 0.0);
    }

    #[test]
    fn canonical_link_matches_log_partition_derivative() {
        let h = 1e-6;
        for family in [GlmFamily::Gaussian, GlmFamily::Bernoulli] {
            let mut nu = -20.0;
            while nu <= 20.0 {
                let fd = (family.log_partition(nu + h) - family.log_partition(nu - h)) / (2.0 * h);
                assert_abs_diff_eq!(fd, family.inverse_link(nu), epsilon = 1e-6);
                nu += 0.5;
            }
        }
    }

    #[test]
    fn label_mapping() {
        let mapped = map_labels_to_unit(&[-1.0, 1.0, -1.0]).unwrap();
        assert_eq!(mapped.to_vec(), vec![0.0, 1.0, 0.0]);
        assert!(map_labels_to_unit(&[2.0]).is_err());
        assert!(GlmFamily::Bernoulli
            .validate_response(array![0.0, 1.0].view())
            .is_ok());
        assert!(GlmFamily::Bernoulli
            .validate_response(array![-1.0, 1.0].view())
            .is_err());
    }

    proptest! {
        // l(t b1 + (1-t) b2) <= t l(b1) + (1-t) l(b2) + slack
        #[test]
        fn nll_is_convex_along_segments(
            b1 in proptest::collection::vec(-3.0f64..3.0, 4),
            b2 in proptest::collection::vec(-3.0f64..3.0, 4),
            t in 0.01f64..0.99,
            bern in proptest::bool::ANY,
        ) {
            let x = array![
                [1.0, -0.5, 0.2, 0.0],
                [0.3, 2.0, -1.0, 0.7],
                [0.0, 0.4, 0.9, -1.2],
                [1.1, 0.2, 0.3, 0.5],
                [-0.7, 0.8, 0.1, 0.9]
            ];
            let family = if bern { GlmFamily::Bernoulli } else { GlmFamily::Gaussian };
            let y = if bern {
                array![1.0, 0.0, 1.0, 0.0, 1.0]
            } else {
                array![0.4, -1.2, 2.0, 0.3, -0.8]
            };
            let part = GroupPartition::new(vec![2, 2]).unwrap();
            let design = GroupedDesign::new(x, y, part.clone()).unwrap();
            let as_coef = |v: &[f64]| Coefficients::new(Array1::from(v.to_vec()), part.clone()).unwrap();
            let mix: Vec<f64> = b1.iter().zip(&b2).map(|(a, b)| t * a + (1.0 - t) * b).collect();
            let l = |c: &Coefficients| negative_log_likelihood(family, &design, c).unwrap();
            let lhs = l(&as_coef(&mix));
            let rhs = t * l(&as_coef(&b1)) + (1.0 - t) * l(&as_coef(&b2));
            prop_assert!(lhs <= rhs + 1e-9);
        }
    }
}
