//! Finite metric measure spaces: validation, subsets, and measure arithmetic.
//!
//! A [`MetricMeasureSpace`] is the validated form of a triple `(X, d, μ)`:
//! `N` labelled points, a dense symmetric `N×N` distance matrix, and strictly
//! positive probability weights. Validation checks every invariant and
//! reports *all* violations found; weights are renormalized so that they sum
//! to exactly 1.0, which keeps downstream half-mass comparisons
//! (`μ(A) ≥ 1/2`) deterministic.

use serde::Serialize;

use crate::{Error, Result};

/// Relative triangle-inequality tolerance: `d(i,k) ≤ d(i,j) + d(j,k) + τ`
/// with `τ = TRIANGLE_REL_TOL · max(dist)`. Relative because Monte Carlo
/// discretizations produce floating-point geodesic distances at arbitrary
/// scales.
pub const TRIANGLE_REL_TOL: f64 = 1e-9;

/// Allowed deviation of the raw weight sum from 1 before renormalization.
pub const WEIGHT_SUM_TOL: f64 = 1e-9;

/// A single invariant violation discovered by [`validate_space`].
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    AsymmetricMatrix { i: usize, j: usize },
    NonzeroDiagonal { i: usize },
    /// Off-diagonal zero distance: two points that should be one.
    DuplicatePoint { i: usize, j: usize },
    TriangleViolation { i: usize, j: usize, k: usize },
    NonpositiveWeight { i: usize },
    WeightSumOff { sum: f64 },
    NonfiniteDistance { i: usize, j: usize },
    NegativeDistance { i: usize, j: usize },
    DuplicateLabel { i: usize, j: usize },
}

pub(crate) fn format_violations(violations: &[Violation]) -> String {
    let mut out = String::new();
    for v in violations {
        out.push_str("\n  ");
        out.push_str(&match v {
            Violation::AsymmetricMatrix { i, j } => format!("dist({i},{j}) != dist({j},{i})"),
            Violation::NonzeroDiagonal { i } => format!("dist({i},{i}) != 0"),
            Violation::DuplicatePoint { i, j } => format!("dist({i},{j}) = 0 off the diagonal"),
            Violation::TriangleViolation { i, j, k } => {
                format!("triangle inequality fails for ({i},{j},{k})")
            }
            Violation::NonpositiveWeight { i } => format!("weight {i} not strictly positive"),
            Violation::WeightSumOff { sum } => format!("weights sum to {sum}, expected 1"),
            Violation::NonfiniteDistance { i, j } => format!("dist({i},{j}) is not finite"),
            Violation::NegativeDistance { i, j } => format!("dist({i},{j}) is negative"),
            Violation::DuplicateLabel { i, j } => format!("labels {i} and {j} coincide"),
        });
    }
    out
}

/// Unvalidated space data, as read from a file or assembled by a generator.
#[derive(Debug, Clone, PartialEq)]
pub struct RawSpace {
    pub labels: Vec<String>,
    /// Row-major `N×N` matrix.
    pub dist: Vec<f64>,
    pub weights: Vec<f64>,
}

/// A validated finite metric measure space `(X, d, μ)`.
///
/// Immutable after construction; weights sum to exactly 1.0.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricMeasureSpace {
    labels: Vec<String>,
    dist: Vec<f64>,
    weights: Vec<f64>,
}

impl MetricMeasureSpace {
    /// Number of points `N`.
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    #[inline]
    pub fn dist(&self, i: usize, j: usize) -> f64 {
        self.dist[i * self.len() + j]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    /// Largest entry of the distance matrix.
    pub fn max_dist(&self) -> f64 {
        self.dist.iter().copied().fold(0.0, f64::max)
    }

    /// `μ(A)`: the sum of member weights, accumulated in ascending index
    /// order so that equal sets always produce bit-identical measures.
    pub fn measure(&self, a: &Subset) -> Result<f64> {
        a.check_range(self.len())?;
        Ok(a.indices().iter().map(|&i| self.weights[i as usize]).sum())
    }

    /// The raw data of this space; feeding it back through
    /// [`validate_space`] reproduces `self` exactly.
    pub fn to_raw(&self) -> RawSpace {
        RawSpace {
            labels: self.labels.clone(),
            dist: self.dist.clone(),
            weights: self.weights.clone(),
        }
    }
}

/// Validate raw space data and normalize its weights.
///
/// Returns the validated space, or `Error::InvalidSpace` carrying every
/// violation found (not just the first). Dimension mismatches are reported
/// as `Error::ShapeMismatch` before any invariant checking.
pub fn validate_space(raw: RawSpace) -> Result<MetricMeasureSpace> {
    let n = raw.weights.len();
    if raw.labels.len() != n {
        return Err(Error::ShapeMismatch {
            what: "labels",
            got: raw.labels.len(),
            expected: n,
        });
    }
    if raw.dist.len() != n * n {
        return Err(Error::ShapeMismatch {
            what: "dist",
            got: raw.dist.len(),
            expected: n * n,
        });
    }

    let mut violations = Vec::new();
    let d = |i: usize, j: usize| raw.dist[i * n + j];

    for i in 0..n {
        for j in 0..n {
            let v = d(i, j);
            if !v.is_finite() {
                violations.push(Violation::NonfiniteDistance { i, j });
            } else if v < 0.0 {
                violations.push(Violation::NegativeDistance { i, j });
            }
        }
    }
    for i in 0..n {
        if d(i, i) != 0.0 {
            violations.push(Violation::NonzeroDiagonal { i });
        }
        for j in (i + 1)..n {
            if d(i, j) != d(j, i) {
                violations.push(Violation::AsymmetricMatrix { i, j });
            }
            if d(i, j) == 0.0 && d(j, i) == 0.0 {
                violations.push(Violation::DuplicatePoint { i, j });
            }
            if raw.labels[i] == raw.labels[j] {
                violations.push(Violation::DuplicateLabel { i, j });
            }
        }
    }

    let max_dist = raw.dist.iter().copied().fold(0.0_f64, f64::max);
    let tri_tol = TRIANGLE_REL_TOL * max_dist;
    if max_dist.is_finite() {
        for i in 0..n {
            for j in 0..n {
                let dij = d(i, j);
                for k in 0..n {
                    if !(d(i, k) <= dij + d(j, k) + tri_tol) {
                        violations.push(Violation::TriangleViolation { i, j, k });
                    }
                }
            }
        }
    }

    for (i, &w) in raw.weights.iter().enumerate() {
        if !(w > 0.0) || !w.is_finite() {
            violations.push(Violation::NonpositiveWeight { i });
        }
    }
    let sum: f64 = raw.weights.iter().sum();
    if !((sum - 1.0).abs() <= WEIGHT_SUM_TOL) {
        violations.push(Violation::WeightSumOff { sum });
    }

    if !violations.is_empty() {
        return Err(Error::InvalidSpace(violations));
    }

    let mut weights = raw.weights;
    renormalize(&mut weights);

    Ok(MetricMeasureSpace {
        labels: raw.labels,
        dist: raw.dist,
        weights,
    })
}

/// Scale weights to unit sum, then adjust the last weight until the plain
/// left-to-right sum is exactly 1.0. The last weight is the right knob: the
/// prefix sum before it is fixed, so once the residual shrinks below an ulp
/// a one-ulp walk on that weight must land on an exact total. An
/// already-exact vector is returned unchanged, which makes validation
/// idempotent.
fn renormalize(weights: &mut [f64]) {
    let sum: f64 = weights.iter().sum();
    if sum == 1.0 {
        return;
    }
    for w in weights.iter_mut() {
        *w /= sum;
    }
    let last = weights.len() - 1;
    for _ in 0..4 {
        let residual = 1.0 - weights.iter().sum::<f64>();
        if residual == 0.0 {
            return;
        }
        let adjusted = weights[last] + residual;
        if !(adjusted > 0.0) {
            return;
        }
        weights[last] = adjusted;
    }
    for _ in 0..8 {
        let residual = 1.0 - weights.iter().sum::<f64>();
        if residual == 0.0 {
            return;
        }
        let stepped = if residual > 0.0 {
            weights[last].next_up()
        } else {
            weights[last].next_down()
        };
        if !(stepped > 0.0) {
            return;
        }
        weights[last] = stepped;
    }
}

/// An index set over the points of a space: the Borel sets `A`, `A₀`, `A₁`,
/// `B` of a finite space. Stored as a sorted, duplicate-free index list;
/// subsets of spaces with `N ≤ 64` freely convert to and from bitmasks.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
#[serde(transparent)]
pub struct Subset {
    indices: Vec<u32>,
}

impl Subset {
    /// Build a subset from arbitrary indices; sorts and deduplicates.
    /// Indices at or beyond `space_size` are rejected.
    pub fn new(indices: impl IntoIterator<Item = usize>, space_size: usize) -> Result<Subset> {
        let mut v: Vec<u32> = Vec::new();
        for i in indices {
            if i >= space_size {
                return Err(Error::IndexOutOfRange {
                    index: i,
                    size: space_size,
                });
            }
            v.push(i as u32);
        }
        v.sort_unstable();
        v.dedup();
        Ok(Subset { indices: v })
    }

    pub fn empty() -> Subset {
        Subset {
            indices: Vec::new(),
        }
    }

    pub fn singleton(i: usize, space_size: usize) -> Result<Subset> {
        Subset::new([i], space_size)
    }

    pub fn full(space_size: usize) -> Subset {
        Subset {
            indices: (0..space_size as u32).collect(),
        }
    }

    pub fn from_mask(mask: u64, space_size: usize) -> Result<Subset> {
        let mut v = Vec::with_capacity(mask.count_ones() as usize);
        let mut m = mask;
        while m != 0 {
            let i = m.trailing_zeros();
            if i as usize >= space_size {
                return Err(Error::IndexOutOfRange {
                    index: i as usize,
                    size: space_size,
                });
            }
            v.push(i);
            m &= m - 1;
        }
        Ok(Subset { indices: v })
    }

    /// Bitmask form; `None` when any index is ≥ 64.
    pub fn mask(&self) -> Option<u64> {
        if self.indices.last().is_some_and(|&i| i >= 64) {
            return None;
        }
        Some(self.indices.iter().fold(0u64, |m, &i| m | (1u64 << i)))
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[u32] {
        &self.indices
    }

    pub fn contains(&self, i: usize) -> bool {
        self.indices.binary_search(&(i as u32)).is_ok()
    }

    pub fn is_subset_of(&self, other: &Subset) -> bool {
        self.indices.iter().all(|&i| other.contains(i as usize))
    }

    pub(crate) fn check_range(&self, space_size: usize) -> Result<()> {
        if let Some(&last) = self.indices.last() {
            if last as usize >= space_size {
                return Err(Error::IndexOutOfRange {
                    index: last as usize,
                    size: space_size,
                });
            }
        }
        Ok(())
    }

    pub(crate) fn check_nonempty(&self) -> Result<()> {
        if self.is_empty() {
            return Err(Error::EmptySubset);
        }
        Ok(())
    }
}

/// Convenience constructor used throughout the tests: equal weights, the
/// given symmetric distance matrix, labels `p0..`.
pub fn space_from_matrix(dist_rows: &[&[f64]]) -> Result<MetricMeasureSpace> {
    let n = dist_rows.len();
    let mut dist = Vec::with_capacity(n * n);
    for row in dist_rows {
        if row.len() != n {
            return Err(Error::ShapeMismatch {
                what: "dist row",
                got: row.len(),
                expected: n,
            });
        }
        dist.extend_from_slice(row);
    }
    validate_space(RawSpace {
        labels: (0..n).map(|i| format!("p{i}")).collect(),
        dist,
        weights: vec![1.0 / n as f64; n],
    })
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use proptest::prelude::*;

    pub(crate) fn two_point(d: f64) -> MetricMeasureSpace {
        space_from_matrix(&[&[0.0, d], &[d, 0.0]]).unwrap()
    }

    #[test]
    fn smallest_nondegenerate_space_validates() {
        let s = two_point(1.0);
        assert_eq!(s.len(), 2);
        assert_eq!(s.weights(), &[0.5, 0.5]);
        assert_eq!(s.dist(0, 1), 1.0);
    }

    #[test]
    fn triangle_violation_is_reported() {
        let res = space_from_matrix(&[
            &[0.0, 1.0, 5.0],
            &[1.0, 0.0, 1.0],
            &[5.0, 1.0, 0.0],
        ]);
        match res {
            Err(Error::InvalidSpace(vs)) => {
                assert!(vs.contains(&Violation::TriangleViolation { i: 0, j: 1, k: 2 }));
            }
            other => panic!("expected InvalidSpace, got {other:?}"),
        }
    }

    #[test]
    fn zero_weight_violates_full_support() {
        let res = validate_space(RawSpace {
            labels: vec!["a".into(), "b".into()],
            dist: vec![0.0, 1.0, 1.0, 0.0],
            weights: vec![0.7, 0.0],
        });
        match res {
            Err(Error::InvalidSpace(vs)) => {
                assert!(vs.contains(&Violation::NonpositiveWeight { i: 1 }));
                assert!(vs.iter().any(|v| matches!(v, Violation::WeightSumOff { .. })));
            }
            other => panic!("expected InvalidSpace, got {other:?}"),
        }
    }

    #[test]
    fn off_diagonal_zero_is_rejected_not_merged() {
        let res = space_from_matrix(&[&[0.0, 0.0], &[0.0, 0.0]]);
        match res {
            Err(Error::InvalidSpace(vs)) => {
                assert!(vs.contains(&Violation::DuplicatePoint { i: 0, j: 1 }));
            }
            other => panic!("expected InvalidSpace, got {other:?}"),
        }
    }

    #[test]
    fn asymmetry_and_shape_errors() {
        let res = validate_space(RawSpace {
            labels: vec!["a".into(), "b".into()],
            dist: vec![0.0, 1.0, 2.0, 0.0],
            weights: vec![0.5, 0.5],
        });
        match res {
            Err(Error::InvalidSpace(vs)) => {
                assert!(vs.contains(&Violation::AsymmetricMatrix { i: 0, j: 1 }))
            }
            other => panic!("expected InvalidSpace, got {other:?}"),
        }
        let res = validate_space(RawSpace {
            labels: vec!["a".into()],
            dist: vec![0.0, 1.0, 1.0, 0.0],
            weights: vec![0.5, 0.5],
        });
        assert!(matches!(res, Err(Error::ShapeMismatch { .. })));
    }

    #[test]
    fn measure_examples() {
        let s = space_from_matrix(&[
            &[0.0, 1.0, 1.0, 1.0],
            &[1.0, 0.0, 1.0, 1.0],
            &[1.0, 1.0, 0.0, 1.0],
            &[1.0, 1.0, 1.0, 0.0],
        ])
        .unwrap();
        let a = Subset::new([0, 1], 4).unwrap();
        assert_eq!(s.measure(&a).unwrap(), 0.5);
        assert_eq!(s.measure(&Subset::empty()).unwrap(), 0.0);

        let s = validate_space(RawSpace {
            labels: vec!["a".into(), "b".into(), "c".into()],
            dist: vec![0.0, 1.0, 1.0, 1.0, 0.0, 1.0, 1.0, 1.0, 0.0],
            weights: vec![0.25, 0.5, 0.25],
        })
        .unwrap();
        let a = Subset::new([1, 2], 3).unwrap();
        assert_eq!(s.measure(&a).unwrap(), 0.75);
    }

    #[test]
    fn measure_rejects_out_of_range() {
        let s = two_point(1.0);
        let a = Subset::new([1, 2], 3).unwrap();
        assert!(matches!(
            s.measure(&a),
            Err(Error::IndexOutOfRange { index: 2, size: 2 })
        ));
    }

    #[test]
    fn subset_construction() {
        let a = Subset::new([3, 1, 1, 0], 4).unwrap();
        assert_eq!(a.indices(), &[0, 1, 3]);
        assert_eq!(a.mask(), Some(0b1011));
        assert_eq!(Subset::from_mask(0b1011, 4).unwrap(), a);
        assert!(Subset::new([4], 4).is_err());
        assert!(a.contains(3) && !a.contains(2));
    }

    prop_compose! {
        /// Random valid space: symmetric matrix pushed through shortest-path
        /// closure (projection onto the metric cone), positive weights.
        pub(crate) fn arb_space(max_n: usize)
            (n in 2usize..=max_n)
            (n in Just(n),
             upper in prop::collection::vec(0.1f64..2.0, n * (n - 1) / 2),
             w in prop::collection::vec(0.05f64..1.0, n))
            -> MetricMeasureSpace
        {
            let mut dist = vec![0.0; n * n];
            let mut it = upper.iter();
            for i in 0..n {
                for j in (i + 1)..n {
                    let v = *it.next().unwrap();
                    dist[i * n + j] = v;
                    dist[j * n + i] = v;
                }
            }
            for k in 0..n {
                for i in 0..n {
                    for j in 0..n {
                        let via = dist[i * n + k] + dist[k * n + j];
                        if via < dist[i * n + j] {
                            dist[i * n + j] = via;
                        }
                    }
                }
            }
            let sum: f64 = w.iter().sum();
            validate_space(RawSpace {
                labels: (0..n).map(|i| format!("p{i}")).collect(),
                dist,
                weights: w.iter().map(|x| x / sum).collect(),
            }).unwrap()
        }
    }

    proptest! {
        #[test]
        fn validation_is_idempotent(s in arb_space(8)) {
            let again = validate_space(s.to_raw()).unwrap();
            prop_assert_eq!(again, s);
        }

        #[test]
        fn weights_sum_exactly_to_one(s in arb_space(8)) {
            prop_assert_eq!(s.weights().iter().sum::<f64>(), 1.0);
        }

        #[test]
        fn measure_additive_and_monotone(s in arb_space(8), mask in 0u64..256) {
            let n = s.len();
            let mask = mask & ((1u64 << n) - 1);
            let a = Subset::from_mask(mask, n).unwrap();
            let complement = Subset::from_mask(!mask & ((1u64 << n) - 1), n).unwrap();
            let total = s.measure(&a).unwrap() + s.measure(&complement).unwrap();
            prop_assert!((total - 1.0).abs() < 1e-12);
            let sub = Subset::from_mask(mask & (mask >> 1), n).unwrap();
            prop_assert!(s.measure(&sub).unwrap() <= s.measure(&a).unwrap() + 1e-15);
        }

        #[test]
        fn triangle_holds_on_validated_spaces(s in arb_space(7)) {
            let tol = TRIANGLE_REL_TOL * s.max_dist();
            let n = s.len();
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        prop_assert!(s.dist(i, k) <= s.dist(i, j) + s.dist(j, k) + tol);
                    }
                }
            }
        }
    }
}
