//! p-norms, dual exponents and mixed l1,p norms over grouped vectors.
//!
//! Everything here is a pure function; all solver optimality conditions are
//! expressed through these primitives.

use std::fmt;
use std::str::FromStr;

use serde::de::{self, Deserializer, Visitor};
use serde::ser::Serializer;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An exponent p in [1, inf] for the inner norm of the l1,p mixed norm.
///
/// Infinity is a distinct variant, never a large float stand-in.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PNorm(Repr);

#[derive(Clone, Copy, Debug, PartialEq)]
enum Repr {
    Finite(f64),
    Inf,
}

impl PNorm {
    /// Validates p >= 1. `f64::INFINITY` is accepted and maps to the
    /// infinity variant.
    pub fn new(p: f64) -> Result<Self> {
        if p.is_nan() || p < 1.0 {
            return Err(Error::invalid(format!("norm exponent must satisfy p >= 1, got {p}")));
        }
        if p.is_infinite() {
            Ok(PNorm(Repr::Inf))
        } else {
            Ok(PNorm(Repr::Finite(p)))
        }
    }

    pub fn inf() -> Self {
        PNorm(Repr::Inf)
    }

    pub fn one() -> Self {
        PNorm(Repr::Finite(1.0))
    }

    pub fn two() -> Self {
        PNorm(Repr::Finite(2.0))
    }

    pub fn is_inf(&self) -> bool {
        matches!(self.0, Repr::Inf)
    }

    /// The exponent as a float; infinity maps to `f64::INFINITY`.
    pub fn value(&self) -> f64 {
        match self.0 {
            Repr::Finite(p) => p,
            Repr::Inf => f64::INFINITY,
        }
    }

    /// The dual exponent q with 1/p + 1/q = 1, under the conventions
    /// p=1 => q=inf and p=inf => q=1.
    pub fn dual(&self) -> PNorm {
        match self.0 {
            Repr::Inf => PNorm(Repr::Finite(1.0)),
            Repr::Finite(p) if p == 1.0 => PNorm(Repr::Inf),
            Repr::Finite(p) => PNorm(Repr::Finite(p / (p - 1.0))),
        }
    }
}

impl fmt::Display for PNorm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            Repr::Finite(p) => write!(f, "{p}"),
            Repr::Inf => write!(f, "inf"),
        }
    }
}

impl FromStr for PNorm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        if t.eq_ignore_ascii_case("inf") || t.eq_ignore_ascii_case("infinity") {
            return Ok(PNorm::inf());
        }
        let p: f64 = t
            .parse()
            .map_err(|_| Error::invalid(format!("cannot parse norm exponent from {s:?}")))?;
        PNorm::new(p)
    }
}

// Serialized as a JSON number for finite p and the string "inf" otherwise
// (JSON has no infinity literal).
impl Serialize for PNorm {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self.0 {
            Repr::Finite(p) => serializer.serialize_f64(p),
            Repr::Inf => serializer.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for PNorm {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        struct PVisitor;
        impl Visitor<'_> for PVisitor {
            type Value = PNorm;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "a number >= 1 or the string \"inf\"")
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<PNorm, E> {
                PNorm::new(v).map_err(E::custom)
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<PNorm, E> {
                PNorm::new(v as f64).map_err(E::custom)
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<PNorm, E> {
                PNorm::new(v as f64).map_err(E::custom)
            }

            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<PNorm, E> {
                v.parse().map_err(E::custom)
            }
        }
        deserializer.deserialize_any(PVisitor)
    }
}

/// A contiguous, disjoint, covering partition of a flat vector of dimension
/// d into J groups of the given positive sizes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupPartition {
    sizes: Vec<usize>,
    offsets: Vec<usize>,
    total: usize,
}

impl GroupPartition {
    pub fn new(sizes: Vec<usize>) -> Result<Self> {
        if sizes.is_empty() {
            return Err(Error::invalid("partition needs at least one group"));
        }
        if sizes.iter().any(|&s| s == 0) {
            return Err(Error::invalid("group sizes must be positive"));
        }
        let mut offsets = Vec::with_capacity(sizes.len());
        let mut total = 0usize;
        for &s in &sizes {
            offsets.push(total);
            total += s;
        }
        Ok(GroupPartition { sizes, offsets, total })
    }

    /// J groups, all of the same size.
    pub fn uniform(groups: usize, size: usize) -> Result<Self> {
        Self::new(vec![size; groups])
    }

    /// d groups of size one (the plain-Lasso structure).
    pub fn singletons(dim: usize) -> Result<Self> {
        Self::new(vec![1; dim])
    }

    pub fn num_groups(&self) -> usize {
        self.sizes.len()
    }

    pub fn total_dim(&self) -> usize {
        self.total
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn range(&self, group: usize) -> std::ops::Range<usize> {
        let start = self.offsets[group];
        start..start + self.sizes[group]
    }

    pub fn iter_ranges(&self) -> impl Iterator<Item = std::ops::Range<usize>> + '_ {
        (0..self.num_groups()).map(|j| self.range(j))
    }

    /// Partition of a sub-vector formed by keeping only the listed groups,
    /// in order.
    pub fn restrict(&self, groups: &[usize]) -> Result<Self> {
        let sizes = groups
            .iter()
            .map(|&j| {
                self.sizes
                    .get(j)
                    .copied()
                    .ok_or_else(|| Error::invalid(format!("group index {j} out of range")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(sizes)
    }
}

fn check_finite(v: &[f64]) -> Result<()> {
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("vector contains a non-finite entry"));
    }
    Ok(())
}

/// lp norm of a vector; the max-rescaled evaluation keeps finite p stable
/// for entries up to ~1e300.
pub fn p_norm(v: &[f64], p: PNorm) -> Result<f64> {
    check_finite(v)?;
    Ok(p_norm_unchecked(v, p))
}

pub(crate) fn p_norm_unchecked(v: &[f64], p: PNorm) -> f64 {
    match p.0 {
        Repr::Inf => v.iter().fold(0.0, |m, &x| m.max(x.abs())),
        Repr::Finite(p) if p == 1.0 => v.iter().map(|x| x.abs()).sum(),
        Repr::Finite(p) if p == 2.0 => {
            let m = v.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
            if m == 0.0 {
                return 0.0;
            }
            let s: f64 = v.iter().map(|&x| (x / m) * (x / m)).sum();
            m * s.sqrt()
        }
        Repr::Finite(p) => {
            let m = v.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
            if m == 0.0 {
                return 0.0;
            }
            let s: f64 = v.iter().map(|&x| (x.abs() / m).powf(p)).sum();
            m * s.powf(1.0 / p)
        }
    }
}

/// Dual exponent q of p (free-function form of [`PNorm::dual`]).
pub fn dual_exponent(p: PNorm) -> PNorm {
    p.dual()
}

/// Mixed l1,p norm: the sum over groups of the per-group lp norms.
pub fn mixed_norm(values: &[f64], partition: &GroupPartition, p: PNorm) -> Result<f64> {
    if values.len() != partition.total_dim() {
        return Err(Error::dims(format!(
            "vector has length {}, partition covers {}",
            values.len(),
            partition.total_dim()
        )));
    }
    check_finite(values)?;
    Ok(mixed_norm_unchecked(values, partition, p))
}

pub(crate) fn mixed_norm_unchecked(values: &[f64], partition: &GroupPartition, p: PNorm) -> f64 {
    partition
        .iter_ranges()
        .map(|r| p_norm_unchecked(&values[r], p))
        .sum()
}

/// Per-group dual norms ||h_j||_q, one entry per group.
pub fn group_dual_norms(h: &[f64], partition: &GroupPartition, q: PNorm) -> Result<Vec<f64>> {
    if h.len() != partition.total_dim() {
        return Err(Error::dims(format!(
            "vector has length {}, partition covers {}",
            h.len(),
            partition.total_dim()
        )));
    }
    check_finite(h)?;
    Ok(partition
        .iter_ranges()
        .map(|r| p_norm_unchecked(&h[r], q))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn p_norm_pythagorean() {
        assert_abs_diff_eq!(p_norm(&[3.0, 4.0], PNorm::two()).unwrap(), 5.0);
    }

    #[test]
    fn p_norm_inf_is_max_abs() {
        assert_abs_diff_eq!(p_norm(&[1.0, -2.0, 3.0], PNorm::inf()).unwrap(), 3.0);
    }

    #[test]
    fn p_norm_fractional_exponent() {
        // (1^1.5 + 1^1.5 + 1^1.5)^(1/1.5) = 3^(2/3)
        let got = p_norm(&[1.0, 1.0, 1.0], PNorm::new(1.5).unwrap()).unwrap();
        let oracle = 3f64.powf(2.0 / 3.0);
        assert_abs_diff_eq!(got, oracle, epsilon = 1e-14);
        assert_abs_diff_eq!(got, 2.080083823051904, epsilon = 1e-12);
    }

    #[test]
    fn p_norm_zero_and_empty() {
        assert_eq!(p_norm(&[], PNorm::new(1.5).unwrap()).unwrap(), 0.0);
        assert_eq!(p_norm(&[0.0, 0.0], PNorm::inf()).unwrap(), 0.0);
    }

    #[test]
    fn p_norm_rejects_non_finite() {
        assert!(p_norm(&[1.0, f64::NAN], PNorm::two()).is_err());
        assert!(p_norm(&[f64::INFINITY], PNorm::one()).is_err());
    }

    #[test]
    fn p_norm_extreme_magnitudes_stay_finite() {
        for p in [1.5, 2.0, 3.0, 10.0] {
            let p = PNorm::new(p).unwrap();
            let big = p_norm(&[1e150, -1e150, 5e149], p).unwrap();
            assert!(big.is_finite() && big > 0.0);
            let small = p_norm(&[1e-150, -1e-150], p).unwrap();
            assert!(small.is_finite() && small > 0.0);
        }
    }

    #[test]
    fn dual_exponent_conventions() {
        assert_eq!(PNorm::two().dual(), PNorm::two());
        assert!(PNorm::one().dual().is_inf());
        assert_eq!(PNorm::inf().dual(), PNorm::one());
        assert_abs_diff_eq!(PNorm::new(1.5).unwrap().dual().value(), 3.0);
    }

    #[test]
    fn partition_rejects_bad_sizes() {
        assert!(GroupPartition::new(vec![]).is_err());
        assert!(GroupPartition::new(vec![2, 0, 1]).is_err());
    }

    #[test]
    fn partition_offsets_cover() {
        let part = GroupPartition::new(vec![2, 3, 1]).unwrap();
        assert_eq!(part.total_dim(), 6);
        assert_eq!(part.range(0), 0..2);
        assert_eq!(part.range(1), 2..5);
        assert_eq!(part.range(2), 5..6);
    }

    #[test]
    fn mixed_norm_examples() {
        let part = GroupPartition::new(vec![2, 2]).unwrap();
        assert_abs_diff_eq!(
            mixed_norm(&[3.0, 4.0, 0.0, 0.0], &part, PNorm::two()).unwrap(),
            5.0
        );
        let single = GroupPartition::new(vec![2]).unwrap();
        assert_abs_diff_eq!(mixed_norm(&[1.0, 1.0], &single, PNorm::one()).unwrap(), 2.0);
        // max per group, summed
        assert_abs_diff_eq!(
            mixed_norm(&[1.0, 2.0, 2.0, 1.0], &part, PNorm::inf()).unwrap(),
            4.0
        );
    }

    #[test]
    fn mixed_norm_rejects_mismatch() {
        let part = GroupPartition::new(vec![2, 2]).unwrap();
        assert!(mixed_norm(&[1.0, 2.0, 3.0], &part, PNorm::one()).is_err());
    }

    #[test]
    fn group_dual_norm_examples() {
        let part = GroupPartition::new(vec![2, 2]).unwrap();
        let got = group_dual_norms(&[3.0, 4.0, 1.0, 0.0], &part, PNorm::two()).unwrap();
        assert_abs_diff_eq!(got[0], 5.0);
        assert_abs_diff_eq!(got[1], 1.0);

        let got = group_dual_norms(&[1.0, -1.0, 2.0, 2.0], &part, PNorm::one()).unwrap();
        assert_abs_diff_eq!(got[0], 2.0);
        assert_abs_diff_eq!(got[1], 4.0);

        let got = group_dual_norms(&[1.0, 2.0, 0.0, 0.0], &part, PNorm::new(3.0).unwrap()).unwrap();
        assert_abs_diff_eq!(got[0], 9f64.powf(1.0 / 3.0), epsilon = 1e-14);
        assert_abs_diff_eq!(got[0], 2.080083823051904, epsilon = 1e-12);
        assert_eq!(got[1], 0.0);
    }

    #[test]
    fn parse_and_display() {
        assert_eq!("inf".parse::<PNorm>().unwrap(), PNorm::inf());
        assert_eq!("2".parse::<PNorm>().unwrap(), PNorm::two());
        assert_eq!(PNorm::inf().to_string(), "inf");
        assert_eq!(PNorm::new(1.5).unwrap().to_string(), "1.5");
        assert!("0.5".parse::<PNorm>().is_err());
        assert!(PNorm::new(f64::NAN).is_err());
    }

    fn p_choices() -> Vec<PNorm> {
        [1.0, 1.25, 1.5, 2.0, 3.0, 10.0]
            .iter()
            .map(|&p| PNorm::new(p).unwrap())
            .chain(std::iter::once(PNorm::inf()))
            .collect()
    }

    proptest! {
        #[test]
        fn holder_inequality(
            v in proptest::collection::vec(-10.0f64..10.0, 1..12),
            w in proptest::collection::vec(-10.0f64..10.0, 1..12),
            pick in 0usize..7,
        ) {
            let n = v.len().min(w.len());
            let (v, w) = (&v[..n], &w[..n]);
            let p = p_choices()[pick];
            let q = p.dual();
            let dot: f64 = v.iter().zip(w).map(|(a, b)| a * b).sum();
            let bound = p_norm(v, p).unwrap() * p_norm(w, q).unwrap();
            prop_assert!(dot.abs() <= bound * (1.0 + 1e-12) + 1e-12);
        }

        #[test]
        fn monotone_in_p(v in proptest::collection::vec(-10.0f64..10.0, 1..12)) {
            let ps = p_choices();
            let mut last = f64::INFINITY;
            for &p in &ps {
                let n = p_norm(&v, p).unwrap();
                prop_assert!(n <= last * (1.0 + 1e-12) + 1e-12);
                last = n;
            }
        }

        #[test]
        fn absolute_homogeneity(
            v in proptest::collection::vec(-10.0f64..10.0, 1..12),
            c in -100.0f64..100.0,
            pick in 0usize..7,
        ) {
            let p = p_choices()[pick];
            let scaled: Vec<f64> = v.iter().map(|x| c * x).collect();
            let lhs = p_norm(&scaled, p).unwrap();
            let rhs = c.abs() * p_norm(&v, p).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + rhs));
        }

        #[test]
        fn dual_is_involution(p in 1.0f64..50.0) {
            let p = PNorm::new(p).unwrap();
            let back = p.dual().dual();
            prop_assert!((back.value() - p.value()).abs() <= 1e-9 * p.value());
        }
    }

    #[test]
    fn dual_involution_boundary_cases() {
        assert_eq!(PNorm::one().dual().dual(), PNorm::one());
        assert_eq!(PNorm::inf().dual().dual(), PNorm::inf());
    }
}
