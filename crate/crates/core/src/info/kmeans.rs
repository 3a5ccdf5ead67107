use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{ClusterAssignment, EmbeddingTable, IcError};

/// `ceil(0.1 * n)`, at least one.
pub fn default_cluster_count(n: usize) -> usize {
    n.div_ceil(10).max(1)
}

#[derive(Debug, Clone)]
pub struct KMeansOutcome {
    pub assignment: ClusterAssignment,
    pub centers: Vec<Vec<f64>>,
    /// Total squared distance after each assignment step.
    pub distortion: Vec<f64>,
    pub iterations: usize,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(point: &[f64], centers: &[Vec<f64>]) -> (u32, f64) {
    let mut best = (0u32, f64::INFINITY);
    for (c, center) in centers.iter().enumerate() {
        let d = sq_dist(point, center);
        if d < best.1 {
            best = (c as u32, d);
        }
    }
    best
}

fn plus_plus_centers(
    emb: &EmbeddingTable,
    k: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Vec<f64>>, IcError> {
    let points: Vec<&[f64]> = emb.rows().collect();
    let n = points.len();
    let mut centers = vec![points[rng.random_range(0..n)].to_vec()];
    let mut best: Vec<f64> = points.iter().map(|p| sq_dist(p, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = best.iter().sum();
        if total <= 0.0 {
            return Err(IcError::DuplicateCenters {
                k,
                distinct: centers.len(),
            });
        }
        let mut target = rng.random::<f64>() * total;
        let mut pick = None;
        for (i, &d) in best.iter().enumerate() {
            if d > 0.0 {
                pick = Some(i);
                if target < d {
                    break;
                }
                target -= d;
            }
        }
        let chosen = points[pick.expect("positive total has a positive entry")].to_vec();
        for (b, p) in best.iter_mut().zip(&points) {
            *b = b.min(sq_dist(p, &chosen));
        }
        centers.push(chosen);
    }
    Ok(centers)
}

/// Lloyd iteration from k-means++ seeding. Stops once assignments are stable
/// or after `max_iters` assignment steps. A cluster that loses all its points
/// keeps its previous center.
pub fn kmeans(
    emb: &EmbeddingTable,
    k: usize,
    seed: u64,
    max_iters: usize,
) -> Result<KMeansOutcome, IcError> {
    let n = emb.len();
    if k == 0 || k > n {
        return Err(IcError::InvalidK { k, n });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers = plus_plus_centers(emb, k, &mut rng)?;
    let points: Vec<&[f64]> = emb.rows().collect();
    let dim = emb.dim();

    let mut labels: Vec<u32> = Vec::new();
    let mut distortion = Vec::new();
    let mut iterations = 0;
    while iterations < max_iters.max(1) {
        iterations += 1;
        let step: Vec<(u32, f64)> = points.par_iter().map(|p| nearest(p, &centers)).collect();
        distortion.push(step.iter().map(|s| s.1).sum());
        let next: Vec<u32> = step.into_iter().map(|s| s.0).collect();
        let stable = next == labels;
        labels = next;
        if stable {
            break;
        }
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &c) in points.iter().zip(&labels) {
            counts[c as usize] += 1;
            for (s, x) in sums[c as usize].iter_mut().zip(p.iter()) {
                *s += x;
            }
        }
        for ((center, sum), &count) in centers.iter_mut().zip(sums).zip(&counts) {
            if count > 0 {
                *center = sum.into_iter().map(|s| s / count as f64).collect();
            }
        }
    }
    Ok(KMeansOutcome {
        assignment: ClusterAssignment::new(labels, k, seed)?,
        centers,
        distortion,
        iterations,
    })
}

pub fn kmeans_cluster(
    emb: &EmbeddingTable,
    k: usize,
    seed: u64,
    max_iters: usize,
) -> Result<ClusterAssignment, IcError> {
    kmeans(emb, k, seed, max_iters).map(|o| o.assignment)
}
