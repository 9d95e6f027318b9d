//! Finite metric measure spaces, approximated Brunn–Minkowski inequalities,
//! and concentration of measure.
//!
//! The central objects are triples `(X, d, μ)`: a finite point set with a
//! symmetric distance matrix and full-support probability weights. On top of
//! them the crate provides:
//!
//! - [`geometry`]: distortion coefficients `(sin(τd)/(τ sin d))^((n-1)/n)`
//!   (with the `+∞` convention at `d ≥ π`), ε-approximated intermediate sets,
//!   open r-neighborhoods, set distances, and diameters.
//! - [`bm`]: evaluation and verification of the ε-approximated
//!   Brunn–Minkowski inequality ε-BM(n−1, n), exhaustively over all subset
//!   pairs or by seeded sampling, with violation reports.
//! - [`concentration`]: the concentration function `α(r)` (exact by subset
//!   enumeration, or a greedy lower bound), the Gaussian bound
//!   `2·exp(−(n−1)r²/π²)`, and the sharper large-`n` bound.
//! - [`discretize`]: ε-net discretization of round spheres (Fibonacci
//!   lattices or farthest-point nets) with Monte Carlo Voronoi cell measures,
//!   producing spaces on which the inequalities can be tested end to end.
//! - [`io`]: the `mms-1` space file format and JSON/CSV run reports.
//!
//! All values are immutable after construction and safe to share across
//! threads; the heavy loops parallelize internally via rayon with
//! order-independent reductions, so results do not depend on worker count.

#![forbid(unsafe_code)]

pub mod bm;
pub mod concentration;
pub mod discretize;
pub mod geometry;
pub mod io;
pub mod space;

pub use bm::{
    bm_check_pair, bm_rhs, bm_verify_exhaustive, bm_verify_sampled, lemma_diameter_witness,
    BMCheckResult, BMParams, BMVerifyReport, SubsetSampler, ToleranceModel,
};
pub use concentration::{
    alpha_exact, alpha_lower_greedy, concentration_profile, gaussian_bound, improved_bound,
    theorem_chain_check, ChainValues, ConcentrationProfile, ProfileStrategy,
};
pub use discretize::{
    discretize_sphere, farthest_point_net, sphere_sample, voronoi_weights, DiscretizationResult,
    DiscretizeConfig, NetStop, PointCloud, SphereMethod,
};
pub use geometry::{
    diameter, distortion_coefficient, inf_coefficient, intermediate_set, neighborhood,
    set_distance, ExtendedReal,
};
pub use space::{validate_space, MetricMeasureSpace, RawSpace, Subset, Violation};

use thiserror::Error;

/// Errors across the crate. Validation failures carry the complete list of
/// violations found, not just the first.
#[derive(Debug, Error)]
pub enum Error {
    #[error("inconsistent dimensions: {what} has length {got}, expected {expected}")]
    ShapeMismatch {
        what: &'static str,
        got: usize,
        expected: usize,
    },
    #[error("invalid space:{}", crate::space::format_violations(.0))]
    InvalidSpace(Vec<Violation>),
    #[error("point index {index} out of range for space of size {size}")]
    IndexOutOfRange { index: usize, size: usize },
    #[error("subset must be nonempty")]
    EmptySubset,
    #[error("tau must lie in (0,1), got {0}")]
    InvalidTau(f64),
    #[error("dimension parameter n must lie in (1,inf), got {0}")]
    InvalidN(f64),
    #[error("t must lie in (0,1), got {0}")]
    InvalidT(f64),
    #[error("eps must be a finite real >= 0, got {0}")]
    InvalidEps(f64),
    #[error("distance must be a finite real >= 0, got {0}")]
    InvalidDistance(f64),
    #[error("r must be > 0, got {0}")]
    NonpositiveR(f64),
    #[error("r must lie in (0,pi), got {0}")]
    ROutOfRange(f64),
    #[error("space too large for {op}: N={size} exceeds cap {cap}")]
    SpaceTooLarge {
        op: &'static str,
        size: usize,
        cap: usize,
    },
    #[error("t grid must be nonempty")]
    EmptyTGrid,
    #[error("r grid must be positive, finite, and strictly increasing")]
    BadRGrid,
    #[error("pair_count must be >= 1")]
    InvalidPairCount,
    #[error("sphere dimension m must be >= 2, got {0}")]
    InvalidSphereDimension(usize),
    #[error("method {method} unsupported for sphere dimension m={m}")]
    UnsupportedDimensionForMethod { method: &'static str, m: usize },
    #[error("point cloud must contain at least one point")]
    EmptyCloud,
    #[error("point {index} has near-zero norm and cannot be normalized")]
    DegeneratePoint { index: usize },
    #[error("center list is empty or out of range")]
    BadCenters,
    #[error("Voronoi cell of center {center} received no samples; raise mc_samples or reduce the center count")]
    EmptyCell { center: usize },
    #[error("mc_samples={got} below the sanity minimum {min} (10 per center)")]
    BadSampleBudget { got: u64, min: u64 },
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("format `{0}` unsupported for this payload")]
    UnsupportedFormat(&'static str),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
