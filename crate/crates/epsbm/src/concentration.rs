//! The concentration function `α(r)` and the Gaussian bounds it satisfies
//! under ε-BM(n−1, n).
//!
//! `α(r) = sup { 1 − μ(A_r) | μ(A) ≥ 1/2 }` with the open neighborhood
//! `A_r = {x | d(x, A) < r}`. On a finite space the supremum is a maximum
//! over subsets, so [`alpha_exact`] computes it exactly by enumeration
//! (N ≤ 20, bitmask tables); [`alpha_lower_greedy`] scans only near-minimal
//! mass balls and is a lower bound at any size.

use rayon::prelude::*;
use serde::Serialize;
use std::collections::HashSet;
use std::f64::consts::PI;

use crate::space::MetricMeasureSpace;
use crate::{Error, Result};

/// Exact enumeration visits `2^N` subsets; beyond this it is refused.
pub const EXACT_ENUM_CAP: usize = 20;

fn check_n(n: f64) -> Result<()> {
    if !(n > 1.0) || !n.is_finite() {
        return Err(Error::InvalidN(n));
    }
    Ok(())
}

fn check_r_positive(r: f64) -> Result<()> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::NonpositiveR(r));
    }
    Ok(())
}

/// Measures of every subset of a small space, indexed by bitmask. Entry
/// construction peels the highest bit so each value is the plain
/// ascending-index sum, bit-identical to [`MetricMeasureSpace::measure`].
fn measure_table(space: &MetricMeasureSpace) -> Vec<f64> {
    let n = space.len();
    let mut table = vec![0.0; 1 << n];
    for mask in 1..(1u64 << n) {
        let msb = 63 - mask.leading_zeros();
        table[mask as usize] = table[(mask ^ (1 << msb)) as usize] + space.weight(msb as usize);
    }
    table
}

/// Bitmask of the open ball `{x | d(x, i) < r}` for every center `i`.
fn ball_masks(space: &MetricMeasureSpace, r: f64) -> Vec<u64> {
    let n = space.len();
    (0..n)
        .map(|i| {
            (0..n)
                .filter(|&x| space.dist(x, i) < r)
                .fold(0u64, |m, x| m | (1 << x))
        })
        .collect()
}

/// Exact concentration function value at radius `r`: the maximum of
/// `1 − μ(A_r)` over all subsets with `μ(A) ≥ 1/2`.
pub fn alpha_exact(space: &MetricMeasureSpace, r: f64) -> Result<f64> {
    check_r_positive(r)?;
    let n = space.len();
    if n > EXACT_ENUM_CAP {
        return Err(Error::SpaceTooLarge {
            op: "alpha_exact",
            size: n,
            cap: EXACT_ENUM_CAP,
        });
    }
    let mu = measure_table(space);
    let balls = ball_masks(space, r);
    Ok(alpha_exact_from_tables(n, &mu, &balls))
}

fn alpha_exact_from_tables(n: usize, mu: &[f64], balls: &[u64]) -> f64 {
    // Neighborhood mask of every subset, by the same highest-bit peeling as
    // the measure table.
    let mut nb = vec![0u64; 1 << n];
    for mask in 1..(1u64 << n) {
        let msb = 63 - mask.leading_zeros();
        nb[mask as usize] = nb[(mask ^ (1 << msb)) as usize] | balls[msb as usize];
    }
    (1..(1u64 << n))
        .into_par_iter()
        .filter(|&mask| mu[mask as usize] >= 0.5)
        .map(|mask| 1.0 - mu[nb[mask as usize] as usize])
        .reduce(|| f64::NEG_INFINITY, f64::max)
}

/// Greedy lower bound for `α(r)`: for each center, the smallest
/// distance-ordered prefix (ties by index) whose mass reaches 1/2 is a
/// feasible candidate; the best `1 − μ(A_r)` among the candidates is
/// returned. Always ≤ [`alpha_exact`] where both run.
pub fn alpha_lower_greedy(space: &MetricMeasureSpace, r: f64) -> Result<f64> {
    check_r_positive(r)?;
    Ok(greedy_multi(space, &[r])[0])
}

/// Half-mass ball candidates around every center, each paired with the
/// min-distance array used to evaluate neighborhoods at any radius.
fn greedy_candidates(space: &MetricMeasureSpace) -> Vec<Vec<f64>> {
    let n = space.len();
    let mut out = Vec::with_capacity(n);
    for c in 0..n {
        let mut order: Vec<u32> = (0..n as u32).collect();
        order.sort_by(|&a, &b| {
            space
                .dist(c, a as usize)
                .partial_cmp(&space.dist(c, b as usize))
                .expect("distances are finite")
                .then(a.cmp(&b))
        });
        let mut cut = n;
        for k in 1..=n {
            let mut members: Vec<u32> = order[..k].to_vec();
            members.sort_unstable();
            let mass: f64 = members.iter().map(|&i| space.weight(i as usize)).sum();
            if mass >= 0.5 {
                cut = k;
                break;
            }
        }
        let candidate = &order[..cut];
        let min_dist: Vec<f64> = (0..n)
            .map(|x| {
                candidate
                    .iter()
                    .map(|&a| space.dist(x, a as usize))
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
        out.push(min_dist);
    }
    out
}

fn greedy_multi(space: &MetricMeasureSpace, r_values: &[f64]) -> Vec<f64> {
    let n = space.len();
    let candidates = greedy_candidates(space);
    r_values
        .iter()
        .map(|&r| {
            candidates
                .iter()
                .map(|min_dist| {
                    // Ascending-index sum: identical accumulation to measure().
                    let mut mass = 0.0;
                    for x in 0..n {
                        if min_dist[x] < r {
                            mass += space.weight(x);
                        }
                    }
                    1.0 - mass
                })
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect()
}

/// The Gaussian concentration bound `2·exp(−(n−1)·r²/π²)`.
pub fn gaussian_bound(n: f64, r: f64) -> Result<f64> {
    check_n(n)?;
    if !(r >= 0.0) || !r.is_finite() {
        return Err(Error::NonpositiveR(r));
    }
    Ok(2.0 * (-(n - 1.0) * r * r / (PI * PI)).exp())
}

/// The sharper large-`n` bound
/// `exp(−n·[1 + 2^(−1/n) − 2·cos(r/2)^((n−1)/n)])`, defined for `r ∈ (0, π)`.
/// Vacuous (≥ 1) when `n·r²` is small; beats [`gaussian_bound`] once the
/// exponent bracket outgrows the `ln 2 / n` correction.
pub fn improved_bound(n: f64, r: f64) -> Result<f64> {
    check_n(n)?;
    if !(r > 0.0 && r < PI) {
        return Err(Error::ROutOfRange(r));
    }
    let bracket = 1.0 + 2f64.powf(-1.0 / n) - 2.0 * ((r / 2.0).cos()).powf((n - 1.0) / n);
    Ok((-n * bracket).exp())
}

/// The three majorization steps of the Gaussian bound's proof, in order:
/// `2·cos(r/2)^(2(n−1)) ≤ 2·(1 − r²/(2π²))^(2(n−1)) ≤ 2·exp(−(n−1)r²/π²)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChainValues {
    pub cap_term: f64,
    pub quad_term: f64,
    pub gauss_term: f64,
}

impl ChainValues {
    /// Both inequalities of the chain, at the given tolerance.
    pub fn holds(&self, tol: f64) -> bool {
        self.cap_term <= self.quad_term + tol && self.quad_term <= self.gauss_term + tol
    }
}

/// Evaluate the proof chain at `(n, r)`, `r ∈ (0, π)`.
pub fn theorem_chain_check(n: f64, r: f64) -> Result<ChainValues> {
    check_n(n)?;
    if !(r > 0.0 && r < PI) {
        return Err(Error::ROutOfRange(r));
    }
    let m = 2.0 * (n - 1.0);
    Ok(ChainValues {
        cap_term: 2.0 * ((r / 2.0).cos()).powf(m),
        quad_term: 2.0 * (1.0 - r * r / (2.0 * PI * PI)).powf(m),
        gauss_term: 2.0 * (-(n - 1.0) * r * r / (PI * PI)).exp(),
    })
}

/// Whether a profile entry is the exact supremum or a greedy lower bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Exactness {
    Exact,
    LowerBound,
}

impl Exactness {
    pub fn as_str(&self) -> &'static str {
        match self {
            Exactness::Exact => "exact",
            Exactness::LowerBound => "lower_bound",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileStrategy {
    Exact,
    Greedy,
    /// Exact when `N ≤ 20`, greedy otherwise.
    Auto,
}

impl std::str::FromStr for ProfileStrategy {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "exact" => Ok(ProfileStrategy::Exact),
            "greedy" => Ok(ProfileStrategy::Greedy),
            "auto" => Ok(ProfileStrategy::Auto),
            other => Err(format!("unknown strategy `{other}` (exact|greedy|auto)")),
        }
    }
}

/// Sampled `r ↦ α(r)` alongside both bound curves.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConcentrationProfile {
    /// Short description of the space, e.g. `"N=300"`.
    pub space: String,
    pub n: f64,
    pub r_values: Vec<f64>,
    pub alpha: Vec<f64>,
    pub exactness: Vec<Exactness>,
    /// `gaussian_bound(n, r)` per grid point.
    pub bound_thm1: Vec<f64>,
    /// `improved_bound(n, r)` per grid point; `None` outside `(0, π)`.
    pub bound_improved: Vec<Option<f64>>,
}

/// Evaluate the concentration function over an increasing positive grid.
///
/// Grid values that coincide exactly with a stored pairwise distance sit on
/// a discontinuity of the step function `α`; they are nudged by
/// `−1e-12·max(dist)` before evaluation so profiles do not depend on such
/// floating-point coincidences.
pub fn concentration_profile(
    space: &MetricMeasureSpace,
    r_values: &[f64],
    n: f64,
    strategy: ProfileStrategy,
) -> Result<ConcentrationProfile> {
    check_n(n)?;
    if r_values.is_empty() {
        return Ok(ConcentrationProfile {
            space: format!("N={}", space.len()),
            n,
            r_values: Vec::new(),
            alpha: Vec::new(),
            exactness: Vec::new(),
            bound_thm1: Vec::new(),
            bound_improved: Vec::new(),
        });
    }
    for w in r_values.windows(2) {
        if !(w[0] < w[1]) {
            return Err(Error::BadRGrid);
        }
    }
    if !(r_values[0] > 0.0) || !r_values[r_values.len() - 1].is_finite() {
        return Err(Error::BadRGrid);
    }

    let exact = match strategy {
        ProfileStrategy::Exact => true,
        ProfileStrategy::Greedy => false,
        ProfileStrategy::Auto => space.len() <= EXACT_ENUM_CAP,
    };

    let breakpoints: HashSet<u64> = (0..space.len())
        .flat_map(|i| (0..space.len()).map(move |j| (i, j)))
        .map(|(i, j)| space.dist(i, j).to_bits())
        .collect();
    let nudge = 1e-12 * space.max_dist();
    let eval_r: Vec<f64> = r_values
        .iter()
        .map(|&r| {
            if breakpoints.contains(&r.to_bits()) {
                r - nudge
            } else {
                r
            }
        })
        .collect();

    let alpha = if exact {
        let mu = measure_table(space);
        eval_r
            .iter()
            .map(|&r| {
                check_r_positive(r)?;
                let balls = ball_masks(space, r);
                Ok(alpha_exact_from_tables(space.len(), &mu, &balls))
            })
            .collect::<Result<Vec<f64>>>()?
    } else {
        for &r in &eval_r {
            check_r_positive(r)?;
        }
        greedy_multi(space, &eval_r)
    };

    let exactness = vec![
        if exact {
            Exactness::Exact
        } else {
            Exactness::LowerBound
        };
        r_values.len()
    ];
    let bound_thm1 = r_values
        .iter()
        .map(|&r| gaussian_bound(n, r))
        .collect::<Result<Vec<f64>>>()?;
    let bound_improved = r_values
        .iter()
        .map(|&r| {
            if r > 0.0 && r < PI {
                improved_bound(n, r).map(Some)
            } else {
                Ok(None)
            }
        })
        .collect::<Result<Vec<Option<f64>>>>()?;

    Ok(ConcentrationProfile {
        space: format!("N={}", space.len()),
        n,
        r_values: r_values.to_vec(),
        alpha,
        exactness,
        bound_thm1,
        bound_improved,
    })
}
