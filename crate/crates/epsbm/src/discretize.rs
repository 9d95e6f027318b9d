//! ε-net discretization of round spheres.
//!
//! A discretization of `(X, d, μ)` keeps a finite set of centers `{xᵢ}`
//! whose ε-balls cover `X`, partitions `X` into cells `Aᵢ ⊆ B_ε(xᵢ)`, and
//! assigns each center the mass of its cell. Here `X` is the unit sphere
//! `S^m`: centers come from a Fibonacci lattice (m = 2) or a farthest-point
//! net over a dense random cloud, cells are Voronoi cells of the centers
//! (nearest center is within ε, so the containment requirement holds), and
//! cell masses are estimated by Monte Carlo with per-cell standard errors.
//!
//! Everything is deterministic given the seed: sample streams are generated
//! sequentially and the parallel phases reduce with order-independent
//! operations (integer counts, max-selections).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::PI;

use crate::space::{validate_space, MetricMeasureSpace, RawSpace};
use crate::{Error, Result};

const SEED_TAG_GRID: u64 = 0x9e37_79b9_7f4a_7c15;
const SEED_TAG_MC: u64 = 0xd1b5_4a32_d192_ed03;

/// Points on a unit sphere, stored as unit vectors in `m+1` coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    points: Vec<Vec<f64>>,
    dim: usize,
}

impl PointCloud {
    /// Normalize and adopt the given vectors. Vectors must share one
    /// dimension; near-zero vectors are rejected.
    pub fn from_points(points: Vec<Vec<f64>>) -> Result<PointCloud> {
        if points.is_empty() {
            return Err(Error::EmptyCloud);
        }
        let dim = points[0].len();
        let mut normalized = Vec::with_capacity(points.len());
        for (index, mut p) in points.into_iter().enumerate() {
            if p.len() != dim {
                return Err(Error::ShapeMismatch {
                    what: "point",
                    got: p.len(),
                    expected: dim,
                });
            }
            let norm = p.iter().map(|x| x * x).sum::<f64>().sqrt();
            if !(norm > 1e-12) {
                return Err(Error::DegeneratePoint { index });
            }
            for x in p.iter_mut() {
                *x /= norm;
            }
            normalized.push(p);
        }
        Ok(PointCloud {
            points: normalized,
            dim,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Ambient dimension `m + 1`.
    pub fn ambient_dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i]
    }

    /// Geodesic distance between two cloud points.
    pub fn geodesic(&self, i: usize, j: usize) -> f64 {
        geodesic_unit(&self.points[i], &self.points[j])
    }
}

/// Geodesic distance between unit vectors via chord length, accurate at both
/// ends of [0, π] where `acos` of a dot product loses digits.
pub(crate) fn geodesic_unit(u: &[f64], v: &[f64]) -> f64 {
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    if dot >= 0.0 {
        let chord_sq: f64 = u.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum();
        2.0 * (0.5 * chord_sq.sqrt()).min(1.0).asin()
    } else {
        let anti_sq: f64 = u.iter().zip(v).map(|(a, b)| (a + b) * (a + b)).sum();
        PI - 2.0 * (0.5 * anti_sq.sqrt()).min(1.0).asin()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SphereMethod {
    /// Golden-angle lattice; near-uniform, deterministic, `S²` only.
    Fibonacci,
    /// Normalized standard Gaussian vectors; any dimension.
    UniformRandom,
}

/// Sample `count` points on the unit sphere `S^m`.
pub fn sphere_sample(
    m: usize,
    count: usize,
    method: SphereMethod,
    seed: u64,
) -> Result<PointCloud> {
    if m < 2 {
        return Err(Error::InvalidSphereDimension(m));
    }
    if count == 0 {
        return Err(Error::EmptyCloud);
    }
    match method {
        SphereMethod::Fibonacci => {
            if m != 2 {
                return Err(Error::UnsupportedDimensionForMethod {
                    method: "fibonacci",
                    m,
                });
            }
            let golden_angle = PI * (3.0 - 5.0_f64.sqrt());
            let points = (0..count)
                .map(|i| {
                    let z = 1.0 - (2.0 * i as f64 + 1.0) / count as f64;
                    let radius = (1.0 - z * z).max(0.0).sqrt();
                    let phi = golden_angle * i as f64;
                    vec![radius * phi.cos(), radius * phi.sin(), z]
                })
                .collect();
            PointCloud::from_points(points)
        }
        SphereMethod::UniformRandom => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let points = (0..count)
                .map(|_| gaussian_unit_vector(m + 1, &mut rng))
                .collect();
            PointCloud::from_points(points)
        }
    }
}

fn gaussian_unit_vector(dim: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.iter().map(|x| x / norm).collect();
        }
    }
}

/// Stopping rule for [`farthest_point_net`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NetStop {
    /// Stop once this many centers are selected.
    CenterCount(usize),
    /// Stop once the covering radius over the cloud drops to this value.
    CoveringRadius(f64),
}

/// Output of the greedy net construction.
#[derive(Debug, Clone, PartialEq)]
pub struct NetResult {
    /// Selected cloud indices, in selection order, starting from index 0.
    pub indices: Vec<usize>,
    /// `max over cloud points of the distance to the nearest center`.
    pub covering_radius: f64,
    /// True when the whole cloud was consumed, i.e. a covering-radius
    /// target could only be met by taking every point.
    pub exhausted: bool,
}

/// Greedy farthest-point traversal from index 0; ties go to the lowest
/// index, so the net is deterministic.
pub fn farthest_point_net(cloud: &PointCloud, stop: NetStop) -> Result<NetResult> {
    let n = cloud.len();
    match stop {
        NetStop::CenterCount(k) => {
            if k == 0 || k > n {
                return Err(Error::BadCenters);
            }
        }
        NetStop::CoveringRadius(eps) => {
            if !(eps > 0.0) || !eps.is_finite() {
                return Err(Error::NonpositiveR(eps));
            }
        }
    }

    let mut selected = vec![0usize];
    let mut min_dist: Vec<f64> = (0..n).map(|x| cloud.geodesic(x, 0)).collect();
    loop {
        let mut far = 0usize;
        let mut cov = f64::NEG_INFINITY;
        for (x, &d) in min_dist.iter().enumerate() {
            if d > cov {
                cov = d;
                far = x;
            }
        }
        let done = match stop {
            NetStop::CenterCount(k) => selected.len() >= k,
            NetStop::CoveringRadius(eps) => cov <= eps || selected.len() == n,
        };
        if done {
            return Ok(NetResult {
                exhausted: selected.len() == n,
                covering_radius: cov,
                indices: selected,
            });
        }
        selected.push(far);
        for x in 0..n {
            let d = cloud.geodesic(x, far);
            if d < min_dist[x] {
                min_dist[x] = d;
            }
        }
    }
}

/// Monte Carlo masses of the Voronoi cells of `centers` (cloud indices):
/// uniform sphere samples are assigned to the nearest center (ties to the
/// lowest index), `weight_i = count_i / mc_samples`, and
/// `stderr_i = sqrt(w_i (1 − w_i) / mc_samples)`.
///
/// An empty cell violates the full-support requirement and is an error.
pub fn voronoi_weights(
    cloud: &PointCloud,
    centers: &[usize],
    mc_samples: u64,
    seed: u64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if centers.is_empty() || centers.iter().any(|&c| c >= cloud.len()) {
        return Err(Error::BadCenters);
    }
    let min_samples = 10 * centers.len() as u64;
    if mc_samples < min_samples {
        return Err(Error::BadSampleBudget {
            got: mc_samples,
            min: min_samples,
        });
    }

    let dim = cloud.ambient_dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples: Vec<f64> = (0..mc_samples)
        .flat_map(|_| gaussian_unit_vector(dim, &mut rng))
        .collect();
    let center_points: Vec<&[f64]> = centers.iter().map(|&c| cloud.point(c)).collect();

    let counts = samples
        .par_chunks(dim * 4096)
        .map(|chunk| {
            let mut local = vec![0u64; centers.len()];
            for s in chunk.chunks_exact(dim) {
                let mut best = 0usize;
                let mut best_dot = f64::NEG_INFINITY;
                for (ci, cp) in center_points.iter().enumerate() {
                    let dot: f64 = s.iter().zip(cp.iter()).map(|(a, b)| a * b).sum();
                    if dot > best_dot {
                        best_dot = dot;
                        best = ci;
                    }
                }
                local[best] += 1;
            }
            local
        })
        .reduce(
            || vec![0u64; centers.len()],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
                a
            },
        );

    debug_assert_eq!(counts.iter().sum::<u64>(), mc_samples);
    if let Some(ci) = counts.iter().position(|&c| c == 0) {
        return Err(Error::EmptyCell {
            center: centers[ci],
        });
    }
    let m = mc_samples as f64;
    let weights: Vec<f64> = counts.iter().map(|&c| c as f64 / m).collect();
    let stderr: Vec<f64> = weights.iter().map(|&w| (w * (1.0 - w) / m).sqrt()).collect();
    Ok((weights, stderr))
}

/// How discretization centers are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum CenterMethod {
    /// Centers are the Fibonacci lattice itself (`m = 2` only).
    Fibonacci,
    /// Greedy farthest-point net over a dense uniform cloud.
    FarthestPoint { cloud_size: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscretizeConfig {
    /// Sphere dimension: `S^m`. Pairs with dimension parameter `n = m` in
    /// curvature terms (the round `S^n` has Ricci `n−1`, dimension `n`).
    pub m: usize,
    pub center_count: usize,
    pub mc_samples: u64,
    pub seed: u64,
    pub method: CenterMethod,
    /// Size of the uniform test grid against which the covering radius is
    /// measured. The true covering radius exceeds the measured one by at
    /// most the grid's own fill distance.
    pub test_grid_size: usize,
}

impl DiscretizeConfig {
    pub fn new(m: usize, center_count: usize, mc_samples: u64, seed: u64) -> DiscretizeConfig {
        DiscretizeConfig {
            m,
            center_count,
            mc_samples,
            seed,
            method: CenterMethod::Fibonacci,
            test_grid_size: 100_000,
        }
    }
}

/// A finite space produced by discretizing `S^m`, with the measurement
/// metadata needed to reproduce and to budget Monte Carlo noise.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscretizationResult {
    pub space: MetricMeasureSpace,
    /// Measured covering radius (the ε of the net).
    pub covering_radius: f64,
    /// Indices of the centers in their source cloud.
    pub center_indices: Vec<usize>,
    pub mc_samples: u64,
    pub seed: u64,
    pub method: CenterMethod,
    pub test_grid_size: usize,
    /// Per-center standard error of the Monte Carlo weight.
    pub weight_stderr: Vec<f64>,
}

/// Compose center selection, covering-radius measurement, Voronoi weight
/// estimation, and validation into a ready-to-use space.
pub fn discretize_sphere(cfg: &DiscretizeConfig) -> Result<DiscretizationResult> {
    if cfg.center_count == 0 {
        return Err(Error::BadCenters);
    }
    if cfg.test_grid_size == 0 {
        return Err(Error::EmptyCloud);
    }

    let (centers_cloud, center_indices, cloud_cov) = match cfg.method {
        CenterMethod::Fibonacci => {
            let cloud = sphere_sample(cfg.m, cfg.center_count, SphereMethod::Fibonacci, cfg.seed)?;
            let idx = (0..cfg.center_count).collect();
            (cloud, idx, 0.0)
        }
        CenterMethod::FarthestPoint { cloud_size } => {
            if cloud_size < cfg.center_count {
                return Err(Error::BadCenters);
            }
            let base = sphere_sample(cfg.m, cloud_size, SphereMethod::UniformRandom, cfg.seed)?;
            let net = farthest_point_net(&base, NetStop::CenterCount(cfg.center_count))?;
            let points = net.indices.iter().map(|&i| base.point(i).to_vec()).collect();
            (
                PointCloud::from_points(points)?,
                net.indices,
                net.covering_radius,
            )
        }
    };

    let grid = sphere_sample(
        cfg.m,
        cfg.test_grid_size,
        SphereMethod::UniformRandom,
        cfg.seed ^ SEED_TAG_GRID,
    )?;
    let grid_cov = covering_radius_against(&centers_cloud, &grid);
    let covering_radius = grid_cov.max(cloud_cov);

    let all: Vec<usize> = (0..centers_cloud.len()).collect();
    let (weights, stderr) =
        voronoi_weights(&centers_cloud, &all, cfg.mc_samples, cfg.seed ^ SEED_TAG_MC)?;

    let n = centers_cloud.len();
    let mut dist = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = centers_cloud.geodesic(i, j);
            dist[i * n + j] = d;
            dist[j * n + i] = d;
        }
    }
    let space = validate_space(RawSpace {
        labels: (0..n).map(|i| format!("p{i}")).collect(),
        dist,
        weights,
    })?;

    Ok(DiscretizationResult {
        space,
        covering_radius,
        center_indices,
        mc_samples: cfg.mc_samples,
        seed: cfg.seed,
        method: cfg.method,
        test_grid_size: cfg.test_grid_size,
        weight_stderr: stderr,
    })
}

/// Largest distance from a grid point to its nearest center.
fn covering_radius_against(centers: &PointCloud, grid: &PointCloud) -> f64 {
    (0..grid.len())
        .into_par_iter()
        .map(|g| {
            let gp = grid.point(g);
            let mut best = 0usize;
            let mut best_dot = f64::NEG_INFINITY;
            for c in 0..centers.len() {
                let dot: f64 = gp.iter().zip(centers.point(c)).map(|(a, b)| a * b).sum();
                if dot > best_dot {
                    best_dot = dot;
                    best = c;
                }
            }
            geodesic_unit(gp, centers.point(best))
        })
        .reduce(|| 0.0, f64::max)
}
