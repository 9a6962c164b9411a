//! Seeded Lloyd's k-means with k-means++-style initialization.
//!
//! Single-threaded on purpose: a fixed seed must give an identical
//! assignment every run.

use std::collections::BTreeMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Embedding, EmbeddingError};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterAssignment {
    pub clusters: BTreeMap<u64, usize>,
    pub k: usize,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Sum of squared distances from each point to its assigned centroid.
pub fn kmeans_objective(points: &[&[f64]], assign: &[usize], centroids: &[Vec<f64>]) -> f64 {
    points
        .iter()
        .zip(assign)
        .map(|(p, &c)| sq_dist(p, &centroids[c]))
        .sum()
}

pub fn kmeans(
    embeddings: &[Embedding],
    k: usize,
    seed: u64,
    max_iter: usize,
) -> Result<ClusterAssignment, EmbeddingError> {
    let n = embeddings.len();
    if k == 0 || k > n {
        return Err(EmbeddingError::BadK { k, n });
    }
    let points: Vec<&[f64]> = embeddings.iter().map(|e| e.values()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // k-means++ seeding: first centroid uniform, then D^2-weighted.
    let mut centroids: Vec<Vec<f64>> = Vec::with_capacity(k);
    centroids.push(points[rng.gen_range(0..n)].to_vec());
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.gen::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                target -= w;
                if target <= 0.0 {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            rng.gen_range(0..n)
        };
        centroids.push(points[next].to_vec());
        for (i, p) in points.iter().enumerate() {
            d2[i] = d2[i].min(sq_dist(p, centroids.last().unwrap()));
        }
    }

    let dim = points[0].len();
    let mut assign = vec![0usize; n];
    for _ in 0..max_iter {
        let mut changed = false;
        for (i, p) in points.iter().enumerate() {
            let mut best = 0usize;
            let mut best_d = f64::INFINITY;
            for (c, centroid) in centroids.iter().enumerate() {
                let d = sq_dist(p, centroid);
                if d < best_d {
                    best_d = d;
                    best = c;
                }
            }
            if assign[i] != best {
                assign[i] = best;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let mut sums = vec![vec![0.0f64; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &c) in points.iter().zip(&assign) {
            counts[c] += 1;
            for (s, v) in sums[c].iter_mut().zip(*p) {
                *s += v;
            }
        }
        for (c, sum) in sums.into_iter().enumerate() {
            if counts[c] > 0 {
                centroids[c] = sum.into_iter().map(|s| s / counts[c] as f64).collect();
            }
            // An emptied cluster keeps its previous centroid.
        }
    }

    let clusters = embeddings
        .iter()
        .zip(&assign)
        .map(|(e, &c)| (e.frame_id, c))
        .collect();
    Ok(ClusterAssignment { clusters, k })
}

/// Export as `frame_id,cluster` CSV.
pub fn save_assignments_csv(assignment: &ClusterAssignment, path: &Path) -> Result<(), EmbeddingError> {
    let mut out = String::new();
    for (frame_id, cluster) in &assignment.clusters {
        out.push_str(&format!("{frame_id},{cluster}\n"));
    }
    std::fs::write(path, out)?;
    Ok(())
}
