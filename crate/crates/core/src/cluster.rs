//! Seeded k-means with k-means++ initialisation.
//!
//! Small inputs only (tens of points, a handful of dimensions), so plain
//! Lloyd iterations with squared Euclidean distance are enough. Every
//! source of randomness comes from the caller's seed, which keeps cluster
//! assignments reproducible across runs.

use crate::rng::rng_for;
use rand::Rng;
use thiserror::Error;

const MAX_ITERS: usize = 200;

#[derive(Debug, Error)]
pub enum ClusterError {
    #[error("cannot cluster an empty point set")]
    EmptyInput,
    #[error("k must be >= 1, got {0}")]
    ZeroK(usize),
    #[error("k = {k} exceeds the {n} available points")]
    TooFewPoints { k: usize, n: usize },
    #[error("point {index} has {got} dimensions, expected {expected}")]
    DimensionMismatch {
        index: usize,
        got: usize,
        expected: usize,
    },
    #[error("point {index} contains a non-finite coordinate")]
    NonFinite { index: usize },
}

#[derive(Debug, Clone)]
pub struct KmeansResult {
    /// Cluster index per input point.
    pub assignment: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    /// Sum of squared distances from each point to its centroid.
    pub inertia: f64,
    pub iterations: usize,
}

fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Nearest centroid by squared distance; ties go to the lowest index.
fn nearest(point: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (c, centroid) in centroids.iter().enumerate() {
        let d = dist_sq(point, centroid);
        if d < best_d {
            best_d = d;
            best = c;
        }
    }
    (best, best_d)
}

fn validate(points: &[Vec<f64>], k: usize) -> Result<usize, ClusterError> {
    if points.is_empty() {
        return Err(ClusterError::EmptyInput);
    }
    if k == 0 {
        return Err(ClusterError::ZeroK(k));
    }
    if k > points.len() {
        return Err(ClusterError::TooFewPoints {
            k,
            n: points.len(),
        });
    }
    let dim = points[0].len();
    for (index, p) in points.iter().enumerate() {
        if p.len() != dim {
            return Err(ClusterError::DimensionMismatch {
                index,
                got: p.len(),
                expected: dim,
            });
        }
        if p.iter().any(|v| !v.is_finite()) {
            return Err(ClusterError::NonFinite { index });
        }
    }
    Ok(dim)
}

/// K-means++ seeding: the first centre is uniform, each further centre is
/// drawn with probability proportional to its squared distance from the
/// nearest chosen centre.
fn seed_centroids(points: &[Vec<f64>], k: usize, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    let mut centroids: Vec<Vec<f64>> = Vec::with_capacity(k);
    centroids.push(points[rng.gen_range(0..points.len())].clone());
    let mut d2: Vec<f64> = points
        .iter()
        .map(|p| dist_sq(p, &centroids[0]))
        .collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total <= 0.0 {
            // All remaining points coincide with a centre; take the first
            // index that is not yet one so the requested k is still met.
            points
                .iter()
                .position(|p| centroids.iter().all(|c| c != p))
                .unwrap_or(0)
        } else {
            let r = rng.gen::<f64>() * total;
            let mut cum = 0.0;
            let mut chosen = points.len() - 1;
            for (i, &d) in d2.iter().enumerate() {
                cum += d;
                if cum > r {
                    chosen = i;
                    break;
                }
            }
            chosen
        };
        centroids.push(points[next].clone());
        let latest = centroids.last().unwrap();
        for (i, p) in points.iter().enumerate() {
            d2[i] = d2[i].min(dist_sq(p, latest));
        }
    }
    centroids
}

/// Runs k-means with at most `max_iters` Lloyd iterations.
pub fn kmeans_with_iters(
    points: &[Vec<f64>],
    k: usize,
    seed: u64,
    max_iters: usize,
) -> Result<KmeansResult, ClusterError> {
    let dim = validate(points, k)?;
    let mut rng = rng_for(seed);
    let mut centroids = seed_centroids(points, k, &mut rng);
    let mut assignment = vec![0usize; points.len()];
    let mut iterations = 0;

    loop {
        let mut changed = false;
        for (i, p) in points.iter().enumerate() {
            let (c, _) = nearest(p, &centroids);
            if assignment[i] != c {
                assignment[i] = c;
                changed = true;
            }
        }
        iterations += 1;
        if iterations > 1 && !changed {
            break;
        }

        let mut sums = vec![vec![0.0f64; dim]; k];
        let mut counts = vec![0usize; k];
        for (i, p) in points.iter().enumerate() {
            counts[assignment[i]] += 1;
            for (s, v) in sums[assignment[i]].iter_mut().zip(p) {
                *s += v;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                for s in sums[c].iter_mut() {
                    *s /= counts[c] as f64;
                }
                centroids[c] = sums[c].clone();
            }
            // An emptied cluster keeps its previous centroid.
        }

        if iterations >= max_iters {
            for (i, p) in points.iter().enumerate() {
                assignment[i] = nearest(p, &centroids).0;
            }
            break;
        }
    }

    let inertia = points
        .iter()
        .zip(&assignment)
        .map(|(p, &c)| dist_sq(p, &centroids[c]))
        .sum();
    Ok(KmeansResult {
        assignment,
        centroids,
        inertia,
        iterations,
    })
}

/// Seeded k-means; deterministic for a fixed `(points, k, seed)` triple.
pub fn kmeans(points: &[Vec<f64>], k: usize, seed: u64) -> Result<KmeansResult, ClusterError> {
    kmeans_with_iters(points, k, seed, MAX_ITERS)
}
