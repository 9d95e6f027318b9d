//! Distortion coefficients, ε-approximated intermediate sets, neighborhoods,
//! set distances, and diameters.
//!
//! The distortion coefficient
//! `(sin(τd) / (τ sin d))^((n−1)/n)` encodes how positive curvature inflates
//! the measure of intermediate sets. It is defined as `+∞` for `d ≥ π` and
//! extended continuously by `1` at `d = 0`. On `(0, π)` the base
//! `sin(τd)/(τ sin d)` is strictly increasing in `d` for every `τ ∈ (0,1)`
//! (because `x ↦ x·cot x` is strictly decreasing on `(0, π)`), so infima over
//! point pairs are attained at closest pairs.

use serde::{Serialize, Serializer};
use std::fmt;

use crate::space::{MetricMeasureSpace, Subset};
use crate::{Error, Result};

/// A nonnegative real extended with `+∞`, the value of distortion
/// coefficients at distances `≥ π`. Never NaN: `+∞` absorbs under
/// multiplication by positive reals and dominates comparisons.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct ExtendedReal(f64);

impl ExtendedReal {
    pub const INFINITY: ExtendedReal = ExtendedReal(f64::INFINITY);
    pub const ONE: ExtendedReal = ExtendedReal(1.0);

    /// Wrap a finite nonnegative value. Values that overflowed to `+∞`
    /// during exponentiation are accepted as the infinite element.
    pub fn new(v: f64) -> ExtendedReal {
        debug_assert!(v >= 0.0 && !v.is_nan());
        ExtendedReal(v)
    }

    /// The underlying `f64`; `f64::INFINITY` for the infinite element.
    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_infinite(self) -> bool {
        self.0.is_infinite()
    }

    pub fn is_finite(self) -> bool {
        self.0.is_finite()
    }
}

impl fmt::Display for ExtendedReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_infinite() {
            write!(f, "inf")
        } else {
            write!(f, "{}", self.0)
        }
    }
}

impl Serialize for ExtendedReal {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        if self.0.is_infinite() {
            serializer.serialize_str("inf")
        } else {
            serializer.serialize_f64(self.0)
        }
    }
}

/// Serialize an `f64` that may legitimately be `±∞` (e.g. a violation gap
/// against an infinite right-hand side). JSON has no infinities, so they are
/// emitted as the strings `"inf"` / `"-inf"`.
pub(crate) fn serialize_extended_f64<S: Serializer>(
    v: &f64,
    serializer: S,
) -> std::result::Result<S::Ok, S::Error> {
    if v.is_infinite() {
        serializer.serialize_str(if *v > 0.0 { "inf" } else { "-inf" })
    } else {
        serializer.serialize_f64(*v)
    }
}

fn check_tau_n(tau: f64, n: f64) -> Result<()> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::InvalidTau(tau));
    }
    if !(n > 1.0) || !n.is_finite() {
        return Err(Error::InvalidN(n));
    }
    Ok(())
}

/// The distortion coefficient `(sin(τd)/(τ sin d))^((n−1)/n)`.
///
/// Returns `+∞` for `d ≥ π`, `1` at `d = 0` (continuous extension), and the
/// finite value otherwise. The ratio is evaluated directly; if it overflows,
/// the computation falls back to log space
/// (`exp(((n−1)/n)(ln sin τd − ln τ − ln sin d))`) so the power never sees an
/// intermediate overflow.
pub fn distortion_coefficient(d: f64, tau: f64, n: f64) -> Result<ExtendedReal> {
    check_tau_n(tau, n)?;
    if !(d >= 0.0) || d.is_nan() {
        return Err(Error::InvalidDistance(d));
    }
    Ok(ExtendedReal::new(coefficient_value(d, tau, n)))
}

/// Coefficient as a bare `f64` for pre-validated `(tau, n)`; hot-loop form.
#[inline]
pub(crate) fn coefficient_value(d: f64, tau: f64, n: f64) -> f64 {
    if d >= std::f64::consts::PI {
        return f64::INFINITY;
    }
    if d == 0.0 {
        return 1.0;
    }
    let expo = (n - 1.0) / n;
    let ratio = (tau * d).sin() / (tau * d.sin());
    if ratio.is_finite() {
        ratio.powf(expo)
    } else {
        let log_ratio = (tau * d).sin().ln() - tau.ln() - d.sin().ln();
        (expo * log_ratio).exp()
    }
}

/// Infimum of the distortion coefficient over `A₀ × A₁`, with an argmin
/// witness pair.
///
/// Since the coefficient is strictly increasing in `d` on `(0, π)`, the
/// infimum is attained at a closest pair; distance ties break to the
/// lexicographically smallest `(i, j)`. The result is `+∞` exactly when
/// every pair is at distance `≥ π`, in which case the witness is the
/// lexicographically first pair.
pub fn inf_coefficient(
    space: &MetricMeasureSpace,
    a0: &Subset,
    a1: &Subset,
    tau: f64,
    n: f64,
) -> Result<(ExtendedReal, (usize, usize))> {
    check_tau_n(tau, n)?;
    let (d, pair) = closest_pair(space, a0, a1)?;
    if d >= std::f64::consts::PI {
        let first = (a0.indices()[0] as usize, a1.indices()[0] as usize);
        return Ok((ExtendedReal::INFINITY, first));
    }
    Ok((distortion_coefficient(d, tau, n)?, pair))
}

pub(crate) fn closest_pair(
    space: &MetricMeasureSpace,
    a0: &Subset,
    a1: &Subset,
) -> Result<(f64, (usize, usize))> {
    a0.check_nonempty()?;
    a1.check_nonempty()?;
    a0.check_range(space.len())?;
    a1.check_range(space.len())?;
    Ok(closest_pair_idx(space, a0.indices(), a1.indices()))
}

/// Closest pair over sorted index slices; ties go to the lexicographically
/// smallest `(i, j)` because the scan only replaces on strict improvement.
pub(crate) fn closest_pair_idx(
    space: &MetricMeasureSpace,
    a0: &[u32],
    a1: &[u32],
) -> (f64, (usize, usize)) {
    let mut best = f64::INFINITY;
    let mut pair = (a0[0] as usize, a1[0] as usize);
    for &i in a0 {
        for &j in a1 {
            let d = space.dist(i as usize, j as usize);
            if d < best {
                best = d;
                pair = (i as usize, j as usize);
            }
        }
    }
    (best, pair)
}

/// The set of ε-approximated t-intermediate points between `A₀` and `A₁`:
/// all `x` for which some `(x₀, x₁) ∈ A₀ × A₁` satisfies
/// `|d(x₀,x) − t·d(x₀,x₁)| ≤ ε` and `|d(x,x₁) − (1−t)·d(x₀,x₁)| ≤ ε`.
///
/// Exact evaluation of the definition by scanning all `(x, x₀, x₁)` triples;
/// both inequalities are non-strict, with no comparison tolerance.
pub fn intermediate_set(
    space: &MetricMeasureSpace,
    a0: &Subset,
    a1: &Subset,
    t: f64,
    eps: f64,
) -> Result<Subset> {
    if !(t > 0.0 && t < 1.0) {
        return Err(Error::InvalidT(t));
    }
    if !(eps >= 0.0) || !eps.is_finite() {
        return Err(Error::InvalidEps(eps));
    }
    a0.check_nonempty()?;
    a1.check_nonempty()?;
    a0.check_range(space.len())?;
    a1.check_range(space.len())?;

    let mut members = Vec::new();
    for x in 0..space.len() {
        if is_intermediate_idx(space, a0.indices(), a1.indices(), t, eps, x) {
            members.push(x);
        }
    }
    Subset::new(members, space.len())
}

#[inline]
pub(crate) fn is_intermediate_idx(
    space: &MetricMeasureSpace,
    a0: &[u32],
    a1: &[u32],
    t: f64,
    eps: f64,
    x: usize,
) -> bool {
    for &i in a0 {
        let d0x = space.dist(i as usize, x);
        for &j in a1 {
            let d01 = space.dist(i as usize, j as usize);
            if (d0x - t * d01).abs() <= eps
                && (space.dist(x, j as usize) - (1.0 - t) * d01).abs() <= eps
            {
                return true;
            }
        }
    }
    false
}

/// The open r-neighborhood `A_r = {x | d(x, A) < r}`, strict inequality
/// exactly as defined; always contains `A`.
pub fn neighborhood(space: &MetricMeasureSpace, a: &Subset, r: f64) -> Result<Subset> {
    if !(r > 0.0) || r.is_nan() {
        return Err(Error::NonpositiveR(r));
    }
    a.check_nonempty()?;
    a.check_range(space.len())?;
    let members = (0..space.len())
        .filter(|&x| a.indices().iter().any(|&i| space.dist(x, i as usize) < r));
    Subset::new(members, space.len())
}

/// `d(A, B) = min over A × B of the distance`; 0 when the sets overlap.
pub fn set_distance(space: &MetricMeasureSpace, a: &Subset, b: &Subset) -> Result<f64> {
    Ok(closest_pair(space, a, b)?.0)
}

/// Largest pairwise distance; 0 for a one-point space.
pub fn diameter(space: &MetricMeasureSpace) -> f64 {
    diameter_with_witness(space).0
}

/// Diameter together with the lexicographically smallest argmax pair.
pub fn diameter_with_witness(space: &MetricMeasureSpace) -> (f64, (usize, usize)) {
    let n = space.len();
    let mut best = 0.0;
    let mut pair = (0, 0);
    for i in 0..n {
        for j in (i + 1)..n {
            let d = space.dist(i, j);
            if d > best {
                best = d;
                pair = (i, j);
            }
        }
    }
    (best, pair)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::tests::{arb_space, two_point};
    use crate::space::space_from_matrix;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    /// 3-point path: d(a,b) = d(b,c) = 1, d(a,c) = 2.
    pub(crate) fn path3() -> MetricMeasureSpace {
        space_from_matrix(&[&[0.0, 1.0, 2.0], &[1.0, 0.0, 1.0], &[2.0, 1.0, 0.0]]).unwrap()
    }

    #[test]
    fn coefficient_at_pi_is_infinite() {
        let c = distortion_coefficient(PI, 0.5, 2.0).unwrap();
        assert!(c.is_infinite());
        assert!(distortion_coefficient(4.0, 0.3, 1.5).unwrap().is_infinite());
    }

    #[test]
    fn coefficient_at_zero_is_one() {
        for tau in [0.1, 0.5, 0.9] {
            for n in [1.5, 2.0, 50.0] {
                assert_eq!(distortion_coefficient(0.0, tau, n).unwrap().value(), 1.0);
            }
        }
    }

    #[test]
    fn coefficient_frozen_value() {
        // (sin(pi/4) / ((1/2) sin(pi/2)))^(1/2) = 2^(1/4); mpmath 40 digits:
        // 1.189207115002721066717499970560475915293
        let c = distortion_coefficient(PI / 2.0, 0.5, 2.0).unwrap().value();
        assert!((c - 1.189207115002721).abs() < 1e-14, "got {c}");
    }

    #[test]
    fn coefficient_rejects_bad_params() {
        assert!(matches!(
            distortion_coefficient(1.0, 0.0, 2.0),
            Err(Error::InvalidTau(_))
        ));
        assert!(matches!(
            distortion_coefficient(1.0, 1.0, 2.0),
            Err(Error::InvalidTau(_))
        ));
        assert!(matches!(
            distortion_coefficient(1.0, 0.5, 1.0),
            Err(Error::InvalidN(_))
        ));
        assert!(matches!(
            distortion_coefficient(-0.1, 0.5, 2.0),
            Err(Error::InvalidDistance(_))
        ));
    }

    #[test]
    fn inf_coefficient_singleton_is_one() {
        let s = two_point(1.0);
        let a = Subset::singleton(0, 2).unwrap();
        let (c, w) = inf_coefficient(&s, &a, &a, 0.5, 2.0).unwrap();
        assert_eq!(c.value(), 1.0);
        assert_eq!(w, (0, 0));
    }

    #[test]
    fn inf_coefficient_all_pairs_beyond_pi() {
        // Two clusters 3.5 apart, intra-cluster distance 0.5.
        let s = space_from_matrix(&[
            &[0.0, 0.5, 3.5, 3.5],
            &[0.5, 0.0, 3.5, 3.5],
            &[3.5, 3.5, 0.0, 0.5],
            &[3.5, 3.5, 0.5, 0.0],
        ])
        .unwrap();
        let a0 = Subset::new([0, 1], 4).unwrap();
        let a1 = Subset::new([2, 3], 4).unwrap();
        let (c, w) = inf_coefficient(&s, &a0, &a1, 0.5, 2.0).unwrap();
        assert!(c.is_infinite());
        assert_eq!(w, (0, 2));
    }

    #[test]
    fn inf_coefficient_two_point_frozen() {
        // (sin(0.5)/(0.5 sin 1))^(1/2); mpmath 40 digits:
        // 1.067470808652184700252703718414584003684
        let s = two_point(1.0);
        let a0 = Subset::singleton(0, 2).unwrap();
        let a1 = Subset::singleton(1, 2).unwrap();
        let (c, w) = inf_coefficient(&s, &a0, &a1, 0.5, 2.0).unwrap();
        assert!((c.value() - 1.0674708086521847).abs() < 1e-14);
        assert_eq!(w, (0, 1));
    }

    #[test]
    fn inf_coefficient_rejects_empty() {
        let s = two_point(1.0);
        let a = Subset::singleton(0, 2).unwrap();
        assert!(matches!(
            inf_coefficient(&s, &Subset::empty(), &a, 0.5, 2.0),
            Err(Error::EmptySubset)
        ));
    }

    #[test]
    fn intermediate_two_point_cases() {
        let s = two_point(1.0);
        let a0 = Subset::singleton(0, 2).unwrap();
        let a1 = Subset::singleton(1, 2).unwrap();
        // eps = 0: no point sits at distance exactly 1/2 from both.
        let i = intermediate_set(&s, &a0, &a1, 0.5, 0.0).unwrap();
        assert!(i.is_empty());
        // eps = 0.5: both endpoints satisfy |0-0.5| <= 0.5 and |1-0.5| <= 0.5.
        let i = intermediate_set(&s, &a0, &a1, 0.5, 0.5).unwrap();
        assert_eq!(i.indices(), &[0, 1]);
    }

    #[test]
    fn intermediate_identity_case() {
        let s = two_point(1.0);
        let a = Subset::singleton(0, 2).unwrap();
        for t in [0.25, 0.5, 0.75] {
            let i = intermediate_set(&s, &a, &a, t, 0.0).unwrap();
            assert_eq!(i.indices(), &[0]);
        }
    }

    #[test]
    fn intermediate_rejects_bad_t() {
        let s = two_point(1.0);
        let a = Subset::singleton(0, 2).unwrap();
        assert!(matches!(
            intermediate_set(&s, &a, &a, 0.0, 0.1),
            Err(Error::InvalidT(_))
        ));
        assert!(matches!(
            intermediate_set(&s, &a, &a, 0.5, -0.1),
            Err(Error::InvalidEps(_))
        ));
    }

    #[test]
    fn neighborhood_strict_boundary() {
        let s = two_point(1.0);
        let a = Subset::singleton(0, 2).unwrap();
        assert_eq!(neighborhood(&s, &a, 1.0).unwrap().indices(), &[0]);
        assert_eq!(neighborhood(&s, &a, 1.0000001).unwrap().indices(), &[0, 1]);
    }

    #[test]
    fn neighborhood_on_path() {
        let s = path3();
        let b = Subset::singleton(1, 3).unwrap();
        assert_eq!(neighborhood(&s, &b, 1.5).unwrap().indices(), &[0, 1, 2]);
        assert!(matches!(
            neighborhood(&s, &b, 0.0),
            Err(Error::NonpositiveR(_))
        ));
    }

    #[test]
    fn set_distance_examples() {
        let s = path3();
        let a = Subset::new([0, 1], 3).unwrap();
        let b = Subset::new([1, 2], 3).unwrap();
        assert_eq!(set_distance(&s, &a, &b).unwrap(), 0.0);
        let a = Subset::singleton(0, 3).unwrap();
        let c = Subset::singleton(2, 3).unwrap();
        assert_eq!(set_distance(&s, &a, &c).unwrap(), 2.0);
        let s2 = two_point(1.0);
        assert_eq!(
            set_distance(
                &s2,
                &Subset::singleton(0, 2).unwrap(),
                &Subset::singleton(1, 2).unwrap()
            )
            .unwrap(),
            1.0
        );
    }

    #[test]
    fn diameter_examples() {
        let one = space_from_matrix(&[&[0.0]]).unwrap();
        assert_eq!(diameter(&one), 0.0);
        assert_eq!(diameter(&two_point(1.0)), 1.0);
        assert_eq!(diameter_with_witness(&path3()), (2.0, (0, 2)));
    }

    proptest! {
        /// For τ = 1/2 the base collapses via sin d = 2 sin(d/2) cos(d/2) to
        /// 1/cos(d/2).
        #[test]
        fn half_coefficient_identity(d in 0.0001f64..3.14, n in 1.01f64..60.0) {
            let c = distortion_coefficient(d, 0.5, n).unwrap().value();
            let closed = (1.0 / (d / 2.0).cos()).powf((n - 1.0) / n);
            prop_assert!((c - closed).abs() <= 1e-12 * closed.max(1.0));
        }

        /// Concavity of sin on [0, π] makes the coefficient ≥ 1 below π.
        #[test]
        fn coefficient_at_least_one(d in 0.0f64..3.141, tau in 0.01f64..0.99, n in 1.01f64..60.0) {
            let c = distortion_coefficient(d, tau, n).unwrap();
            prop_assert!(c.value() >= 1.0 - 1e-13);
        }

        /// Strictly increasing in d on (0, π), for every τ.
        #[test]
        fn coefficient_monotone_in_d(d in 0.001f64..3.0, delta in 0.001f64..0.14,
                                     tau in 0.05f64..0.95, n in 1.1f64..60.0) {
            let lo = distortion_coefficient(d, tau, n).unwrap().value();
            let hi = distortion_coefficient(d + delta, tau, n).unwrap().value();
            prop_assert!(hi > lo);
        }

        #[test]
        fn intermediate_swap_symmetry(s in arb_space(7), m0 in 1u64..128, m1 in 1u64..128,
                                      t in 0.05f64..0.95, eps in 0.0f64..2.0) {
            let n = s.len();
            let all = (1u64 << n) - 1;
            let (m0, m1) = (m0 & all, m1 & all);
            prop_assume!(m0 != 0 && m1 != 0);
            let a0 = Subset::from_mask(m0, n).unwrap();
            let a1 = Subset::from_mask(m1, n).unwrap();
            let fwd = intermediate_set(&s, &a0, &a1, t, eps).unwrap();
            let bwd = intermediate_set(&s, &a1, &a0, 1.0 - t, eps).unwrap();
            prop_assert_eq!(fwd, bwd);
        }

        #[test]
        fn intermediate_monotone_in_eps(s in arb_space(7), m0 in 1u64..128, m1 in 1u64..128,
                                        t in 0.05f64..0.95, eps in 0.0f64..1.0, extra in 0.0f64..1.0) {
            let n = s.len();
            let all = (1u64 << n) - 1;
            let (m0, m1) = (m0 & all, m1 & all);
            prop_assume!(m0 != 0 && m1 != 0);
            let a0 = Subset::from_mask(m0, n).unwrap();
            let a1 = Subset::from_mask(m1, n).unwrap();
            let small = intermediate_set(&s, &a0, &a1, t, eps).unwrap();
            let large = intermediate_set(&s, &a0, &a1, t, eps + extra).unwrap();
            prop_assert!(small.is_subset_of(&large));
        }

        #[test]
        fn neighborhood_monotone_and_contains(s in arb_space(7), m in 1u64..128,
                                              r in 0.01f64..3.0, extra in 0.0f64..1.0) {
            let n = s.len();
            let m = m & ((1u64 << n) - 1);
            prop_assume!(m != 0);
            let a = Subset::from_mask(m, n).unwrap();
            let near = neighborhood(&s, &a, r).unwrap();
            let far = neighborhood(&s, &a, r + extra).unwrap();
            prop_assert!(a.is_subset_of(&near));
            prop_assert!(near.is_subset_of(&far));
            let bigger = Subset::from_mask(m | 1, n).unwrap();
            let near_bigger = neighborhood(&s, &bigger, r).unwrap();
            prop_assert!(near.is_subset_of(&near_bigger));
        }

        /// Pairs at distance ≥ r with everything < π: the infimum dominates
        /// the coefficient at r (monotonicity step of the Gaussian bound).
        #[test]
        fn inf_dominates_coefficient_at_set_distance(s in arb_space(7), m0 in 1u64..128, m1 in 1u64..128,
                                                     n_dim in 1.1f64..60.0) {
            let n = s.len();
            let all = (1u64 << n) - 1;
            let (m0, m1) = (m0 & all, m1 & all);
            prop_assume!(m0 != 0 && m1 != 0);
            let a0 = Subset::from_mask(m0, n).unwrap();
            let a1 = Subset::from_mask(m1, n).unwrap();
            prop_assume!(diameter(&s) < std::f64::consts::PI);
            let r = set_distance(&s, &a0, &a1).unwrap();
            let (inf, _) = inf_coefficient(&s, &a0, &a1, 0.5, n_dim).unwrap();
            let at_r = distortion_coefficient(r, 0.5, n_dim).unwrap();
            prop_assert!(inf.value() >= at_r.value() - 1e-12);
        }
    }
}
