//! Evaluation and verification of the ε-approximated Brunn–Minkowski
//! inequality ε-BM(n−1, n).
//!
//! One instance of the inequality, for nonempty `A₀, A₁` and `t ∈ (0,1)`:
//!
//! ```text
//! μ(I_t^ε(A₀,A₁))^(1/n) ≥ (1−t)·[inf coeff(d, 1−t, n)]·μ(A₀)^(1/n)
//!                        +     t·[inf coeff(d, t,   n)]·μ(A₁)^(1/n)
//! ```
//!
//! with the infima over pairs in `A₀ × A₁` and `coeff = +∞` at distances
//! `≥ π`. [`bm_verify_exhaustive`] checks every ordered pair of nonempty
//! subsets (small spaces only); [`bm_verify_sampled`] draws seeded random
//! pairs. Both are embarrassingly parallel; reductions compare on a total
//! order so the reports are identical regardless of worker count.
//!
//! A space with two points further than π apart cannot satisfy the
//! inequality for any ε (take small balls around them: the right-hand side
//! is `+∞` against finite mass). The exhaustive verifier reports such a
//! witness without enumerating.

use rand::seq::index::sample as index_sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::PI;

use crate::geometry::{
    closest_pair_idx, coefficient_value, diameter_with_witness, is_intermediate_idx,
    serialize_extended_f64, ExtendedReal,
};
use crate::space::{MetricMeasureSpace, Subset};
use crate::{Error, Result};

/// Exhaustive verification enumerates `(2^N − 1)²` ordered subset pairs; the
/// guard keeps that at desk scale.
pub const EXHAUSTIVE_CAP: usize = 14;

/// The triple `(ε, n, t)` parameterizing one ε-BM(n−1, n) instance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BMParams {
    eps: f64,
    n: f64,
    t: f64,
}

impl BMParams {
    pub fn new(eps: f64, n: f64, t: f64) -> Result<BMParams> {
        if !(eps >= 0.0) || !eps.is_finite() {
            return Err(Error::InvalidEps(eps));
        }
        if !(n > 1.0) || !n.is_finite() {
            return Err(Error::InvalidN(n));
        }
        if !(t > 0.0 && t < 1.0) {
            return Err(Error::InvalidT(t));
        }
        Ok(BMParams { eps, n, t })
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn n(&self) -> f64 {
        self.n
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn with_t(self, t: f64) -> Result<BMParams> {
        BMParams::new(self.eps, self.n, t)
    }
}

/// How `satisfied` tolerates small negative gaps.
///
/// `Fixed(0)` is exact and right for exactly-weighted spaces. For Monte
/// Carlo-weighted spaces, `McWeights` derives a per-instance 3σ budget from
/// the binomial standard error of each subset mass (σ(m) = √(m(1−m)/M),
/// floored at 1/M), mapped to the root scale through the Hölder bound
/// `|a^(1/n) − b^(1/n)| ≤ |a−b|^(1/n)` and weighted by the coefficients on
/// the right-hand side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum ToleranceModel {
    Fixed { tol: f64 },
    McWeights { mc_samples: u64 },
}

impl Default for ToleranceModel {
    fn default() -> Self {
        ToleranceModel::Fixed { tol: 0.0 }
    }
}

impl ToleranceModel {
    pub fn fixed(tol: f64) -> ToleranceModel {
        ToleranceModel::Fixed { tol }
    }

    fn tolerance(&self, n: f64, t: f64, mu_i: f64, mu0: f64, mu1: f64, c0: f64, c1: f64) -> f64 {
        match *self {
            ToleranceModel::Fixed { tol } => tol,
            ToleranceModel::McWeights { mc_samples } => {
                let m = mc_samples as f64;
                let sigma = |mu: f64| ((mu * (1.0 - mu)) / m).sqrt().max(1.0 / m);
                let root = |x: f64| x.powf(1.0 / n);
                let mut tol = root(3.0 * sigma(mu_i));
                if c0.is_finite() {
                    tol += (1.0 - t) * c0 * root(3.0 * sigma(mu0));
                }
                if c1.is_finite() {
                    tol += t * c1 * root(3.0 * sigma(mu1));
                }
                tol
            }
        }
    }
}

/// An infimum coefficient value and the pair attaining it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoeffWitness {
    pub value: ExtendedReal,
    pub pair: (usize, usize),
}

/// Outcome of one (A₀, A₁, t) instance of the inequality.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BMCheckResult {
    pub a0: Subset,
    pub a1: Subset,
    pub t: f64,
    /// `μ(I_t^ε)^(1/n)`.
    pub lhs: f64,
    pub rhs: ExtendedReal,
    /// `lhs − rhs`, `−∞` when the right-hand side is infinite.
    #[serde(serialize_with = "serialize_extended_f64")]
    pub gap: f64,
    pub satisfied: bool,
    /// The tolerance actually applied: `satisfied ⇔ gap ≥ −tol`.
    pub tol: f64,
    /// Coefficient multiplying `μ(A₀)^(1/n)` (τ = 1−t), with witness pair.
    pub coeff0: CoeffWitness,
    /// Coefficient multiplying `μ(A₁)^(1/n)` (τ = t), with witness pair.
    pub coeff1: CoeffWitness,
}

/// Kernel result without materialized subsets; cheap to produce in bulk.
#[derive(Debug, Clone, Copy)]
struct CoreCheck {
    lhs: f64,
    rhs: f64,
    gap: f64,
    satisfied: bool,
    tol: f64,
    c0: f64,
    c1: f64,
    witness: (usize, usize),
}

fn check_core(
    space: &MetricMeasureSpace,
    a0: &[u32],
    a1: &[u32],
    eps: f64,
    n: f64,
    t: f64,
    tol_model: &ToleranceModel,
) -> CoreCheck {
    let (dmin, pair) = closest_pair_idx(space, a0, a1);
    let witness = if dmin >= PI {
        (a0[0] as usize, a1[0] as usize)
    } else {
        pair
    };
    let c0 = coefficient_value(dmin, 1.0 - t, n);
    let c1 = if t == 0.5 {
        c0
    } else {
        coefficient_value(dmin, t, n)
    };
    let mu0: f64 = a0.iter().map(|&i| space.weight(i as usize)).sum();
    let mu1: f64 = a1.iter().map(|&i| space.weight(i as usize)).sum();
    let rhs = (1.0 - t) * c0 * mu0.powf(1.0 / n) + t * c1 * mu1.powf(1.0 / n);

    let mut mu_i = 0.0;
    for x in 0..space.len() {
        if is_intermediate_idx(space, a0, a1, t, eps, x) {
            mu_i += space.weight(x);
        }
    }
    let lhs = mu_i.powf(1.0 / n);
    let gap = lhs - rhs;
    let tol = tol_model.tolerance(n, t, mu_i, mu0, mu1, c0, c1);
    CoreCheck {
        lhs,
        rhs,
        gap,
        satisfied: gap >= -tol,
        tol,
        c0,
        c1,
        witness,
    }
}

fn core_to_result(a0: Subset, a1: Subset, t: f64, core: CoreCheck) -> BMCheckResult {
    BMCheckResult {
        a0,
        a1,
        t,
        lhs: core.lhs,
        rhs: ExtendedReal::new(core.rhs),
        gap: core.gap,
        satisfied: core.satisfied,
        tol: core.tol,
        coeff0: CoeffWitness {
            value: ExtendedReal::new(core.c0),
            pair: core.witness,
        },
        coeff1: CoeffWitness {
            value: ExtendedReal::new(core.c1),
            pair: core.witness,
        },
    }
}

fn check_inputs(space: &MetricMeasureSpace, a0: &Subset, a1: &Subset) -> Result<()> {
    a0.check_nonempty()?;
    a1.check_nonempty()?;
    a0.check_range(space.len())?;
    a1.check_range(space.len())?;
    Ok(())
}

/// Right-hand side of the inequality:
/// `(1−t)·inf_coeff(τ=1−t)·μ(A₀)^(1/n) + t·inf_coeff(τ=t)·μ(A₁)^(1/n)`.
/// `+∞` exactly when every pair of `A₀ × A₁` is at distance ≥ π.
pub fn bm_rhs(
    space: &MetricMeasureSpace,
    a0: &Subset,
    a1: &Subset,
    params: &BMParams,
) -> Result<ExtendedReal> {
    check_inputs(space, a0, a1)?;
    let core = check_core(
        space,
        a0.indices(),
        a1.indices(),
        params.eps,
        params.n,
        params.t,
        &ToleranceModel::default(),
    );
    Ok(ExtendedReal::new(core.rhs))
}

/// Check one instance at tolerance 0.
pub fn bm_check_pair(
    space: &MetricMeasureSpace,
    a0: &Subset,
    a1: &Subset,
    params: &BMParams,
) -> Result<BMCheckResult> {
    bm_check_pair_with(space, a0, a1, params, &ToleranceModel::default())
}

/// Check one instance under an explicit tolerance model.
pub fn bm_check_pair_with(
    space: &MetricMeasureSpace,
    a0: &Subset,
    a1: &Subset,
    params: &BMParams,
    tol_model: &ToleranceModel,
) -> Result<BMCheckResult> {
    check_inputs(space, a0, a1)?;
    let core = check_core(
        space,
        a0.indices(),
        a1.indices(),
        params.eps,
        params.n,
        params.t,
        tol_model,
    );
    Ok(core_to_result(a0.clone(), a1.clone(), params.t, core))
}

/// Witness pair for the diameter short-circuit: `d(i, j) > π`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LemmaWitness {
    pub i: usize,
    pub j: usize,
    pub dist: f64,
}

/// The diameter obstruction: a pair further than π apart, if one exists.
/// Any space containing one fails ε-BM(n−1, n) for every ε and n.
pub fn lemma_diameter_witness(space: &MetricMeasureSpace) -> Option<LemmaWitness> {
    let (diam, pair) = diameter_with_witness(space);
    (diam > PI).then_some(LemmaWitness {
        i: pair.0,
        j: pair.1,
        dist: diam,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum VerifyStrategy {
    Exhaustive,
    Sampled {
        seed: u64,
        pair_count: u64,
        sampler: String,
    },
}

/// Aggregate verification outcome. `worst` is the minimum-gap instance among
/// everything checked.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BMVerifyReport {
    pub eps: f64,
    pub n: f64,
    pub t_values: Vec<f64>,
    pub tolerance: ToleranceModel,
    pub strategy: VerifyStrategy,
    pub checked_count: u64,
    pub violation_count: u64,
    pub worst: Option<BMCheckResult>,
    /// Set when two points further than π apart make the inequality
    /// unsatisfiable outright; no instances are enumerated in that case.
    pub lemma_shortcircuit: Option<LemmaWitness>,
}

impl BMVerifyReport {
    /// True when the space was shown not to satisfy ε-BM(n−1, n).
    pub fn refuted(&self) -> bool {
        self.lemma_shortcircuit.is_some() || self.violation_count > 0
    }
}

/// Ordering key for the worst-instance reduction: gap first, then a unique
/// instance id, so the min is a total order and parallel reduction is
/// deterministic.
#[derive(Debug, Clone, Copy, PartialEq)]
struct WorstKey {
    gap: f64,
    id: (u64, u64, usize),
}

impl WorstKey {
    fn better_than(&self, other: &WorstKey) -> bool {
        match self.gap.partial_cmp(&other.gap).expect("gap is never NaN") {
            std::cmp::Ordering::Less => true,
            std::cmp::Ordering::Greater => false,
            std::cmp::Ordering::Equal => self.id < other.id,
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Accumulator {
    checked: u64,
    violations: u64,
    worst: Option<WorstKey>,
}

impl Accumulator {
    fn record(&mut self, key: WorstKey, satisfied: bool) {
        self.checked += 1;
        if !satisfied {
            self.violations += 1;
        }
        match &self.worst {
            Some(w) if !key.better_than(w) => {}
            _ => self.worst = Some(key),
        }
    }

    fn merge(mut self, other: Accumulator) -> Accumulator {
        self.checked += other.checked;
        self.violations += other.violations;
        self.worst = match (self.worst, other.worst) {
            (Some(a), Some(b)) => Some(if a.better_than(&b) { a } else { b }),
            (a, b) => a.or(b),
        };
        self
    }
}

fn validate_t_grid(t_values: &[f64]) -> Result<()> {
    if t_values.is_empty() {
        return Err(Error::EmptyTGrid);
    }
    for &t in t_values {
        if !(t > 0.0 && t < 1.0) {
            return Err(Error::InvalidT(t));
        }
    }
    Ok(())
}

fn push_bits(mask: u64, out: &mut Vec<u32>) {
    out.clear();
    let mut m = mask;
    while m != 0 {
        out.push(m.trailing_zeros());
        m &= m - 1;
    }
}

/// Check every ordered pair of nonempty subsets at every `t` in `t_values`.
///
/// Spaces with more than [`EXHAUSTIVE_CAP`] points are refused. If the
/// diameter exceeds π the report carries a `lemma_shortcircuit` witness and
/// nothing is enumerated.
pub fn bm_verify_exhaustive(
    space: &MetricMeasureSpace,
    params: &BMParams,
    t_values: &[f64],
    tol_model: &ToleranceModel,
) -> Result<BMVerifyReport> {
    validate_t_grid(t_values)?;
    let n_pts = space.len();
    if n_pts > EXHAUSTIVE_CAP {
        return Err(Error::SpaceTooLarge {
            op: "bm_verify_exhaustive",
            size: n_pts,
            cap: EXHAUSTIVE_CAP,
        });
    }

    let base = BMVerifyReport {
        eps: params.eps,
        n: params.n,
        t_values: t_values.to_vec(),
        tolerance: *tol_model,
        strategy: VerifyStrategy::Exhaustive,
        checked_count: 0,
        violation_count: 0,
        worst: None,
        lemma_shortcircuit: None,
    };

    if let Some(witness) = lemma_diameter_witness(space) {
        return Ok(BMVerifyReport {
            lemma_shortcircuit: Some(witness),
            ..base
        });
    }

    let full: u64 = (1u64 << n_pts) - 1;
    let acc = (1..=full)
        .into_par_iter()
        .map(|m0| {
            let mut a0_idx = Vec::with_capacity(n_pts);
            let mut a1_idx = Vec::with_capacity(n_pts);
            push_bits(m0, &mut a0_idx);
            let mut acc = Accumulator::default();
            for m1 in 1..=full {
                push_bits(m1, &mut a1_idx);
                for (ti, &t) in t_values.iter().enumerate() {
                    let core =
                        check_core(space, &a0_idx, &a1_idx, params.eps, params.n, t, tol_model);
                    acc.record(
                        WorstKey {
                            gap: core.gap,
                            id: (m0, m1, ti),
                        },
                        core.satisfied,
                    );
                }
            }
            acc
        })
        .reduce(Accumulator::default, Accumulator::merge);

    let worst = acc.worst.map(|key| {
        let (m0, m1, ti) = key.id;
        let a0 = Subset::from_mask(m0, n_pts).expect("mask within range");
        let a1 = Subset::from_mask(m1, n_pts).expect("mask within range");
        let t = t_values[ti];
        let core = check_core(space, a0.indices(), a1.indices(), params.eps, params.n, t, tol_model);
        core_to_result(a0, a1, t, core)
    });

    Ok(BMVerifyReport {
        checked_count: acc.checked,
        violation_count: acc.violations,
        worst,
        ..base
    })
}

/// Families of random subsets for sampled verification.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum SubsetSampler {
    /// Uniform single points.
    Singletons,
    /// Closed metric balls with uniform center and radius uniform in
    /// `[0, diameter)`.
    Balls,
    /// Uniform subsets of cardinality uniform in `1..=max_card`.
    RandomSubsets { max_card: usize },
}

impl SubsetSampler {
    pub fn name(&self) -> &'static str {
        match self {
            SubsetSampler::Singletons => "singletons",
            SubsetSampler::Balls => "balls",
            SubsetSampler::RandomSubsets { .. } => "random_subsets",
        }
    }

    fn draw(&self, space: &MetricMeasureSpace, diam: f64, rng: &mut ChaCha8Rng) -> Subset {
        let n = space.len();
        match *self {
            SubsetSampler::Singletons => {
                Subset::singleton(rng.random_range(0..n), n).expect("index in range")
            }
            SubsetSampler::Balls => {
                let center = rng.random_range(0..n);
                let radius = rng.random::<f64>() * diam;
                Subset::new(
                    (0..n).filter(|&x| space.dist(x, center) <= radius),
                    n,
                )
                .expect("indices in range")
            }
            SubsetSampler::RandomSubsets { max_card } => {
                let cap = max_card.clamp(1, n);
                let card = rng.random_range(1..=cap);
                Subset::new(index_sample(rng, n, card).iter(), n).expect("indices in range")
            }
        }
    }
}

/// Draw `pair_count` independent `(A₀, A₁)` pairs from the sampler and check
/// each at every `t`. Deterministic given the seed, independent of worker
/// count.
pub fn bm_verify_sampled(
    space: &MetricMeasureSpace,
    params: &BMParams,
    t_values: &[f64],
    pair_count: u64,
    sampler: &SubsetSampler,
    seed: u64,
    tol_model: &ToleranceModel,
) -> Result<BMVerifyReport> {
    validate_t_grid(t_values)?;
    if pair_count == 0 {
        return Err(Error::InvalidPairCount);
    }
    let diam = crate::geometry::diameter(space);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pairs: Vec<(Subset, Subset)> = (0..pair_count)
        .map(|_| {
            (
                sampler.draw(space, diam, &mut rng),
                sampler.draw(space, diam, &mut rng),
            )
        })
        .collect();

    let acc = pairs
        .par_iter()
        .enumerate()
        .map(|(idx, (a0, a1))| {
            let mut acc = Accumulator::default();
            for (ti, &t) in t_values.iter().enumerate() {
                let core = check_core(
                    space,
                    a0.indices(),
                    a1.indices(),
                    params.eps,
                    params.n,
                    t,
                    tol_model,
                );
                acc.record(
                    WorstKey {
                        gap: core.gap,
                        id: (idx as u64, 0, ti),
                    },
                    core.satisfied,
                );
            }
            acc
        })
        .reduce(Accumulator::default, Accumulator::merge);

    let worst = acc.worst.map(|key| {
        let (idx, _, ti) = key.id;
        let (a0, a1) = &pairs[idx as usize];
        let t = t_values[ti];
        let core = check_core(space, a0.indices(), a1.indices(), params.eps, params.n, t, tol_model);
        core_to_result(a0.clone(), a1.clone(), t, core)
    });

    Ok(BMVerifyReport {
        eps: params.eps,
        n: params.n,
        t_values: t_values.to_vec(),
        tolerance: *tol_model,
        strategy: VerifyStrategy::Sampled {
            seed,
            pair_count,
            sampler: sampler.name().to_string(),
        },
        checked_count: acc.checked,
        violation_count: acc.violations,
        worst,
        lemma_shortcircuit: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::space_from_matrix;
    use crate::space::tests::{arb_space, two_point};
    use proptest::prelude::*;

    fn singleton_pair(n: usize) -> (Subset, Subset) {
        (
            Subset::singleton(0, n).unwrap(),
            Subset::singleton(1, n).unwrap(),
        )
    }

    // (sin(0.5)/(0.5 sin 1))^(1/2) * sqrt(1/2), mpmath 40 digits:
    // 0.7548158475166473087373717012574233161059
    const RHS_TWO_POINT: f64 = 0.7548158475166473;

    #[test]
    fn rhs_two_point_frozen() {
        let s = two_point(1.0);
        let (a0, a1) = singleton_pair(2);
        let params = BMParams::new(0.0, 2.0, 0.5).unwrap();
        let rhs = bm_rhs(&s, &a0, &a1, &params).unwrap();
        assert!((rhs.value() - RHS_TWO_POINT).abs() < 1e-14);
    }

    #[test]
    fn rhs_full_sets_equals_inf_coefficient() {
        // A0 = A1 = X with μ(X) = 1: rhs = (1-t)c + tc = c ≥ 1.
        let s = space_from_matrix(&[&[0.0, 1.0, 2.0], &[1.0, 0.0, 1.0], &[2.0, 1.0, 0.0]]).unwrap();
        let full = Subset::full(3);
        let params = BMParams::new(0.0, 2.0, 0.5).unwrap();
        let rhs = bm_rhs(&s, &full, &full, &params).unwrap();
        // Overlapping sets contain d = 0 pairs, so the inf coefficient is 1.
        assert!((rhs.value() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rhs_infinite_beyond_pi() {
        let s = two_point(3.5);
        let (a0, a1) = singleton_pair(2);
        let params = BMParams::new(0.0, 2.0, 0.5).unwrap();
        assert!(bm_rhs(&s, &a0, &a1, &params).unwrap().is_infinite());
    }

    #[test]
    fn check_pair_two_point_violation() {
        let s = two_point(1.0);
        let (a0, a1) = singleton_pair(2);
        let params = BMParams::new(0.0, 2.0, 0.5).unwrap();
        let res = bm_check_pair(&s, &a0, &a1, &params).unwrap();
        assert_eq!(res.lhs, 0.0);
        assert!((res.rhs.value() - RHS_TWO_POINT).abs() < 1e-14);
        assert!(!res.satisfied);
        assert!((res.gap + RHS_TWO_POINT).abs() < 1e-14);
        assert_eq!(res.coeff0.pair, (0, 1));
    }

    #[test]
    fn check_pair_full_sets_with_large_eps() {
        let s = space_from_matrix(&[&[0.0, 1.0, 2.0], &[1.0, 0.0, 1.0], &[2.0, 1.0, 0.0]]).unwrap();
        let full = Subset::full(3);
        let params = BMParams::new(2.5, 2.0, 0.3).unwrap();
        let res = bm_check_pair(&s, &full, &full, &params).unwrap();
        assert_eq!(res.lhs, 1.0);
        assert!(res.satisfied);
    }

    #[test]
    fn params_validation() {
        assert!(matches!(
            BMParams::new(-0.1, 2.0, 0.5),
            Err(Error::InvalidEps(_))
        ));
        assert!(matches!(
            BMParams::new(0.0, 1.0, 0.5),
            Err(Error::InvalidN(_))
        ));
        assert!(matches!(
            BMParams::new(0.0, 2.0, 1.0),
            Err(Error::InvalidT(_))
        ));
    }

    #[test]
    fn exhaustive_two_point_report() {
        let s = two_point(1.0);
        let params = BMParams::new(0.0, 2.0, 0.5).unwrap();
        let report =
            bm_verify_exhaustive(&s, &params, &[0.5], &ToleranceModel::default()).unwrap();
        assert_eq!(report.checked_count, 9);
        assert!(report.violation_count >= 1);
        assert!(report.refuted());
        let worst = report.worst.unwrap();
        assert_eq!(worst.a0.indices(), &[0]);
        assert_eq!(worst.a1.indices(), &[1]);
        assert_eq!(worst.lhs, 0.0);
        assert!((worst.gap + RHS_TWO_POINT).abs() < 1e-14);
    }

    #[test]
    fn exhaustive_one_point_space_all_satisfied() {
        let s = space_from_matrix(&[&[0.0]]).unwrap();
        let params = BMParams::new(0.0, 2.0, 0.5).unwrap();
        let report =
            bm_verify_exhaustive(&s, &params, &[0.5], &ToleranceModel::default()).unwrap();
        assert_eq!(report.checked_count, 1);
        assert_eq!(report.violation_count, 0);
        assert!(!report.refuted());
        let worst = report.worst.unwrap();
        assert_eq!(worst.lhs, 1.0);
        assert_eq!(worst.gap, 0.0);
    }

    #[test]
    fn exhaustive_lemma_shortcircuit() {
        let s = two_point(3.5);
        let params = BMParams::new(0.5, 2.0, 0.5).unwrap();
        let report =
            bm_verify_exhaustive(&s, &params, &[0.5], &ToleranceModel::default()).unwrap();
        assert_eq!(report.checked_count, 0);
        assert!(report.refuted());
        let w = report.lemma_shortcircuit.unwrap();
        assert_eq!((w.i, w.j), (0, 1));
        assert_eq!(w.dist, 3.5);
        assert!(report.worst.is_none());
    }

    #[test]
    fn exhaustive_guards() {
        let s = two_point(1.0);
        let params = BMParams::new(0.0, 2.0, 0.5).unwrap();
        assert!(matches!(
            bm_verify_exhaustive(&s, &params, &[], &ToleranceModel::default()),
            Err(Error::EmptyTGrid)
        ));
        // 15-point path metric d(i,j) = |i-j|/10: exceeds the cap.
        let n = 15;
        let dist: Vec<f64> = (0..n * n)
            .map(|k| ((k / n) as f64 - (k % n) as f64).abs() / 10.0)
            .collect();
        let big = crate::space::validate_space(crate::space::RawSpace {
            labels: (0..n).map(|i| format!("p{i}")).collect(),
            dist,
            weights: vec![1.0 / n as f64; n],
        })
        .unwrap();
        assert!(matches!(
            bm_verify_exhaustive(&big, &params, &[0.5], &ToleranceModel::default()),
            Err(Error::SpaceTooLarge { size: 15, cap: 14, .. })
        ));
    }

    #[test]
    fn sampled_singletons_find_the_violation() {
        let s = two_point(1.0);
        let params = BMParams::new(0.0, 2.0, 0.5).unwrap();
        let report = bm_verify_sampled(
            &s,
            &params,
            &[0.5],
            64,
            &SubsetSampler::Singletons,
            9,
            &ToleranceModel::default(),
        )
        .unwrap();
        assert!(report.violation_count >= 1);
        let worst = report.worst.unwrap();
        assert_eq!(worst.lhs, 0.0);
        assert!((worst.gap + RHS_TWO_POINT).abs() < 1e-14);
    }

    #[test]
    fn sampled_rejects_zero_pairs() {
        let s = two_point(1.0);
        let params = BMParams::new(0.0, 2.0, 0.5).unwrap();
        assert!(matches!(
            bm_verify_sampled(
                &s,
                &params,
                &[0.5],
                0,
                &SubsetSampler::Singletons,
                1,
                &ToleranceModel::default()
            ),
            Err(Error::InvalidPairCount)
        ));
    }

    #[test]
    fn sampled_reproducible_across_pools() {
        let s = space_from_matrix(&[
            &[0.0, 1.0, 2.0, 1.5],
            &[1.0, 0.0, 1.0, 0.8],
            &[2.0, 1.0, 0.0, 1.2],
            &[1.5, 0.8, 1.2, 0.0],
        ])
        .unwrap();
        let params = BMParams::new(0.1, 2.0, 0.5).unwrap();
        let run = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap();
            pool.install(|| {
                bm_verify_sampled(
                    &s,
                    &params,
                    &[0.25, 0.5, 0.75],
                    200,
                    &SubsetSampler::RandomSubsets { max_card: 4 },
                    42,
                    &ToleranceModel::default(),
                )
                .unwrap()
            })
        };
        let a = run(1);
        let b = run(4);
        assert_eq!(a, b);
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }

    proptest! {
        /// Satisfied at ε stays satisfied at every ε' ≥ ε.
        #[test]
        fn satisfied_is_monotone_in_eps(s in arb_space(6), m0 in 1u64..64, m1 in 1u64..64,
                                        t in 0.05f64..0.95, eps in 0.0f64..1.0, extra in 0.0f64..1.0) {
            let n = s.len();
            let all = (1u64 << n) - 1;
            let (m0, m1) = (m0 & all, m1 & all);
            prop_assume!(m0 != 0 && m1 != 0);
            let a0 = Subset::from_mask(m0, n).unwrap();
            let a1 = Subset::from_mask(m1, n).unwrap();
            let small = bm_check_pair(&s, &a0, &a1, &BMParams::new(eps, 2.0, t).unwrap()).unwrap();
            let large = bm_check_pair(&s, &a0, &a1, &BMParams::new(eps + extra, 2.0, t).unwrap()).unwrap();
            if small.satisfied {
                prop_assert!(large.satisfied);
            }
        }

        /// Swapping (A₀, A₁, t) → (A₁, A₀, 1−t) swaps the two rhs terms.
        #[test]
        fn swap_symmetry(s in arb_space(6), m0 in 1u64..64, m1 in 1u64..64,
                         t in 0.05f64..0.95, eps in 0.0f64..1.5) {
            let n = s.len();
            let all = (1u64 << n) - 1;
            let (m0, m1) = (m0 & all, m1 & all);
            prop_assume!(m0 != 0 && m1 != 0);
            let a0 = Subset::from_mask(m0, n).unwrap();
            let a1 = Subset::from_mask(m1, n).unwrap();
            let fwd = bm_check_pair(&s, &a0, &a1, &BMParams::new(eps, 3.0, t).unwrap()).unwrap();
            let bwd = bm_check_pair(&s, &a1, &a0, &BMParams::new(eps, 3.0, 1.0 - t).unwrap()).unwrap();
            prop_assert_eq!(fwd.lhs, bwd.lhs);
            prop_assert!((fwd.rhs.value() - bwd.rhs.value()).abs() <= 1e-12 * fwd.rhs.value().max(1.0));
        }
    }
}
