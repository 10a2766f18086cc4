//! Seeded Lloyd's k-means over an embedding store.

use std::collections::BTreeMap;

use rand::Rng;
use rayon::prelude::*;

use crate::embed::EmbeddingStore;
use crate::rng::seeded;
use crate::{Error, Result};

/// Clustering parameters. The defaults (20 clusters, seed 0, 300 iterations)
/// are the ones the analysis pipeline runs with.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KmeansConfig {
    pub m: usize,
    pub seed: u64,
    pub max_iters: usize,
}

impl Default for KmeansConfig {
    fn default() -> Self {
        KmeansConfig {
            m: 20,
            seed: 0,
            max_iters: 300,
        }
    }
}

/// A converged (or iteration-capped) clustering.
#[derive(Debug, Clone)]
pub struct KmeansResult {
    assignment: BTreeMap<String, usize>,
    centroids: Vec<Vec<f64>>,
    inertia_trace: Vec<f64>,
}

impl KmeansResult {
    /// Image id → cluster index.
    pub fn assignment(&self) -> &BTreeMap<String, usize> {
        &self.assignment
    }

    pub fn centroids(&self) -> &[Vec<f64>] {
        &self.centroids
    }

    /// Total squared distance to assigned centroids, one entry per
    /// assignment step (non-increasing).
    pub fn inertia_trace(&self) -> &[f64] {
        &self.inertia_trace
    }

    pub fn inertia(&self) -> f64 {
        *self.inertia_trace.last().expect("at least one iteration")
    }
}

fn squared_distance(a: &[f32], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = f64::from(x) - y;
            d * d
        })
        .sum()
}

/// Index of the nearest centroid; ties go to the lowest index.
fn nearest(point: &[f32], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (index, centroid) in centroids.iter().enumerate() {
        let d = squared_distance(point, centroid);
        if d < best.1 {
            best = (index, d);
        }
    }
    best
}

/// k-means++ initialization: the first centroid is a uniformly random point,
/// each further one is drawn with probability proportional to its squared
/// distance from the nearest chosen centroid. When every remaining point
/// coincides with a centroid the draw falls back to uniform.
fn seed_centroids(store: &EmbeddingStore, config: &KmeansConfig) -> Vec<Vec<f64>> {
    let mut rng = seeded(config.seed);
    let n = store.len();
    let rows: Vec<&[f32]> = store
        .ids()
        .iter()
        .map(|id| store.vector(id).expect("own id"))
        .collect();

    let first = rng.random_range(0..n);
    let mut centroids: Vec<Vec<f64>> = vec![rows[first].iter().map(|&x| f64::from(x)).collect()];
    let mut dist2: Vec<f64> = rows
        .iter()
        .map(|row| squared_distance(row, &centroids[0]))
        .collect();

    while centroids.len() < config.m {
        let total: f64 = dist2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (index, &weight) in dist2.iter().enumerate() {
                target -= weight;
                if target <= 0.0 {
                    chosen = index;
                    break;
                }
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        let centroid: Vec<f64> = rows[pick].iter().map(|&x| f64::from(x)).collect();
        for (slot, row) in dist2.iter_mut().zip(&rows) {
            *slot = slot.min(squared_distance(row, &centroid));
        }
        centroids.push(centroid);
    }
    centroids
}

/// Clusters the store's vectors with Lloyd's algorithm under seeded k-means++
/// initialization. Stops when assignments stabilize or `max_iters` is
/// reached. Deterministic for a fixed store and seed regardless of thread
/// count: the assignment step is an order-preserving parallel map and all
/// accumulation happens in row order.
pub fn kmeans(store: &EmbeddingStore, config: &KmeansConfig) -> Result<KmeansResult> {
    if config.m == 0 || config.max_iters == 0 {
        return Err(Error::InvalidArgument(
            "m and max_iters must be positive".into(),
        ));
    }
    if config.m > store.len() {
        return Err(Error::InvalidArgument(format!(
            "m = {} exceeds the {} stored vectors",
            config.m,
            store.len()
        )));
    }
    let rows: Vec<&[f32]> = store
        .ids()
        .iter()
        .map(|id| store.vector(id).expect("own id"))
        .collect();
    let mut centroids = seed_centroids(store, config);
    let mut assignment: Vec<usize> = Vec::new();
    let mut inertia_trace = Vec::new();

    for _ in 0..config.max_iters {
        let next: Vec<(usize, f64)> = rows
            .par_iter()
            .map(|row| nearest(row, &centroids))
            .collect();
        let next_assignment: Vec<usize> = next.iter().map(|&(cluster, _)| cluster).collect();
        inertia_trace.push(next.iter().map(|&(_, d)| d).sum());
        let converged = next_assignment == assignment;
        assignment = next_assignment;
        if converged {
            break;
        }

        let dim = store.dim();
        let mut sums = vec![vec![0.0f64; dim]; config.m];
        let mut counts = vec![0usize; config.m];
        for (row, &cluster) in rows.iter().zip(&assignment) {
            counts[cluster] += 1;
            for (slot, &x) in sums[cluster].iter_mut().zip(*row) {
                *slot += f64::from(x);
            }
        }
        for (cluster, sum) in sums.into_iter().enumerate() {
            // A cluster that lost all members keeps its previous centroid.
            if counts[cluster] > 0 {
                centroids[cluster] = sum
                    .into_iter()
                    .map(|value| value / counts[cluster] as f64)
                    .collect();
            }
        }
    }

    Ok(KmeansResult {
        assignment: store
            .ids()
            .iter()
            .cloned()
            .zip(assignment.iter().copied())
            .collect(),
        centroids,
        inertia_trace,
    })
}
