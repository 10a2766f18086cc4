//! Dense embedding stores with exact nearest-neighbour search.
//!
//! Embeddings are produced by external encoders and exchanged through a
//! two-file format: a JSON manifest `{"dim", "count", "dtype": "f32le",
//! "normalized", "ids"}` and a raw blob of little-endian 32-bit floats,
//! row-major, no header. The store keeps vectors as f32 but accumulates all
//! distances in f64.
//!
//! Search is exact by design — collections here are at most a few hundred
//! thousand rows, and the bias metrics downstream need reproducible
//! orderings, not throughput. Scans parallelize over row chunks; chunk
//! results merge under a total order (distance, then ascending id), so the
//! outcome is identical for any thread count. Ties always break by ascending
//! id.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// How close to 1 a row's L2 norm must be for a store that claims to be
/// normalized.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-4;

/// Distance used for neighbour search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Euclidean,
    CosineDistance,
}

impl Metric {
    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Euclidean => "euclidean",
            Metric::CosineDistance => "cosine_distance",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euclidean" => Ok(Metric::Euclidean),
            "cosine_distance" | "cosine" => Ok(Metric::CosineDistance),
            other => Err(Error::InvalidArgument(format!(
                "unknown metric {other:?} (expected \"euclidean\" or \"cosine_distance\")"
            ))),
        }
    }
}

/// Nearest neighbours of one query row, closest first.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborList {
    pub query_id: String,
    /// `(id, distance)` pairs: distances non-decreasing, ids unique, the
    /// query itself excluded.
    pub neighbors: Vec<(String, f64)>,
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    dim: usize,
    count: usize,
    dtype: String,
    normalized: bool,
    ids: Vec<String>,
}

/// An immutable id-indexed matrix of f32 embeddings.
#[derive(Debug, Clone)]
pub struct EmbeddingStore {
    ids: Vec<String>,
    index: HashMap<String, usize>,
    dim: usize,
    data: Vec<f32>,
    normalized: bool,
}

impl EmbeddingStore {
    /// Builds a store from rows already in memory. `data` is row-major with
    /// `ids.len() × dim` entries. Validates dimensions, id uniqueness,
    /// finiteness, and — when `normalized` is claimed — row norms.
    pub fn from_rows(ids: Vec<String>, dim: usize, data: Vec<f32>, normalized: bool) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Embedding("dim must be positive".into()));
        }
        if data.len() != ids.len() * dim {
            return Err(Error::Embedding(format!(
                "expected {} × {} = {} values, found {}",
                ids.len(),
                dim,
                ids.len() * dim,
                data.len()
            )));
        }
        let mut index = HashMap::with_capacity(ids.len());
        for (row, id) in ids.iter().enumerate() {
            if index.insert(id.clone(), row).is_some() {
                return Err(Error::Embedding(format!("duplicate id {id:?} at row {row}")));
            }
        }
        let store = EmbeddingStore {
            ids,
            index,
            dim,
            data,
            normalized,
        };
        for row in 0..store.len() {
            if !store.row(row).iter().all(|x| x.is_finite()) {
                return Err(Error::Embedding(format!("non-finite value in row {row}")));
            }
            if normalized {
                let norm = l2_norm(store.row(row));
                if (norm - 1.0).abs() > NORMALIZATION_TOLERANCE {
                    return Err(Error::Embedding(format!(
                        "store claims normalized but row {row} has L2 norm {norm}"
                    )));
                }
            }
        }
        Ok(store)
    }

    /// Loads a store from its manifest + blob file pair.
    pub fn load(manifest_path: &Path, blob_path: &Path) -> Result<Self> {
        let manifest_text =
            fs::read_to_string(manifest_path).map_err(|e| Error::io(manifest_path, e))?;
        let manifest: Manifest = serde_json::from_str(&manifest_text)
            .map_err(|e| Error::malformed("embedding manifest", manifest_path, e.to_string()))?;
        if manifest.dtype != "f32le" {
            return Err(Error::malformed(
                "embedding manifest",
                manifest_path,
                format!("unsupported dtype {:?} (only \"f32le\")", manifest.dtype),
            ));
        }
        if manifest.ids.len() != manifest.count {
            return Err(Error::malformed(
                "embedding manifest",
                manifest_path,
                format!(
                    "count is {} but {} ids listed",
                    manifest.count,
                    manifest.ids.len()
                ),
            ));
        }
        let blob = fs::read(blob_path).map_err(|e| Error::io(blob_path, e))?;
        let expected = manifest.count * manifest.dim * 4;
        if blob.len() != expected {
            return Err(Error::Embedding(format!(
                "blob {} holds {} bytes, manifest declares {} ({} rows × {} dims × 4)",
                blob_path.display(),
                blob.len(),
                expected,
                manifest.count,
                manifest.dim
            )));
        }
        let data: Vec<f32> = blob
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .collect();
        EmbeddingStore::from_rows(manifest.ids, manifest.dim, data, manifest.normalized)
    }

    /// Writes the manifest + blob file pair. A round trip through
    /// [`EmbeddingStore::load`] restores the matrix bit for bit.
    pub fn save(&self, manifest_path: &Path, blob_path: &Path) -> Result<()> {
        let manifest = Manifest {
            dim: self.dim,
            count: self.len(),
            dtype: "f32le".to_string(),
            normalized: self.normalized,
            ids: self.ids.clone(),
        };
        let manifest_text =
            serde_json::to_string_pretty(&manifest).expect("manifest serialization cannot fail");
        fs::write(manifest_path, manifest_text).map_err(|e| Error::io(manifest_path, e))?;
        let mut blob = Vec::with_capacity(self.data.len() * 4);
        for value in &self.data {
            blob.extend_from_slice(&value.to_le_bytes());
        }
        fs::write(blob_path, blob).map_err(|e| Error::io(blob_path, e))
    }

    /// Returns a copy with every row scaled to unit L2 norm and the
    /// normalized flag set. Errors on a zero row, naming its id.
    pub fn l2_normalize(&self) -> Result<EmbeddingStore> {
        let mut data = Vec::with_capacity(self.data.len());
        for row in 0..self.len() {
            let norm = l2_norm(self.row(row));
            if norm == 0.0 {
                return Err(Error::Embedding(format!(
                    "cannot normalize zero vector at id {:?}",
                    self.ids[row]
                )));
            }
            data.extend(self.row(row).iter().map(|&x| (x as f64 / norm) as f32));
        }
        EmbeddingStore::from_rows(self.ids.clone(), self.dim, data, true)
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index.contains_key(id)
    }

    fn row(&self, row: usize) -> &[f32] {
        &self.data[row * self.dim..(row + 1) * self.dim]
    }

    /// The vector stored under `id`, if any.
    pub fn vector(&self, id: &str) -> Option<&[f32]> {
        self.index.get(id).map(|&row| self.row(row))
    }

    fn require_row(&self, id: &str, kind: &'static str) -> Result<usize> {
        self.index.get(id).copied().ok_or_else(|| Error::UnknownId {
            kind,
            id: id.to_string(),
        })
    }

    /// Exact k nearest rows to `query_id` over the whole store, excluding the
    /// query row itself. Requires `k ≤ len − 1`.
    pub fn knn(&self, query_id: &str, k: usize, metric: Metric) -> Result<NeighborList> {
        let all: Vec<usize> = (0..self.len()).collect();
        self.knn_over_rows(query_id, all, k, metric)
    }

    /// Exact k nearest rows to `query_id` among `pool` (an id set; duplicates
    /// ignored), excluding the query row if the pool contains it. Every pool
    /// id must exist in the store.
    pub fn knn_among(
        &self,
        query_id: &str,
        pool: &[String],
        k: usize,
        metric: Metric,
    ) -> Result<NeighborList> {
        let mut rows = Vec::with_capacity(pool.len());
        for id in pool {
            rows.push(self.require_row(id, "embedding")?);
        }
        rows.sort_unstable();
        rows.dedup();
        self.knn_over_rows(query_id, rows, k, metric)
    }

    fn knn_over_rows(
        &self,
        query_id: &str,
        mut rows: Vec<usize>,
        k: usize,
        metric: Metric,
    ) -> Result<NeighborList> {
        let query_row = self.require_row(query_id, "embedding")?;
        rows.retain(|&r| r != query_row);
        if k > rows.len() {
            return Err(Error::InvalidArgument(format!(
                "k = {k} but only {} candidate rows besides the query",
                rows.len()
            )));
        }
        let query = self.row(query_row).to_vec();
        let top = self.scan_top_k(&query, &rows, k, metric);
        Ok(NeighborList {
            query_id: query_id.to_string(),
            neighbors: top
                .into_iter()
                .map(|(row, distance)| (self.ids[row].clone(), distance))
                .collect(),
        })
    }

    /// Ranks `pool` (an id set; duplicates ignored) by ascending Euclidean
    /// distance to `query` and returns the top `k` as `(id, distance)` pairs.
    /// On a normalized store this ordering coincides with descending cosine
    /// similarity.
    pub fn rank_by_similarity(
        &self,
        query: &[f32],
        pool: &[String],
        k: usize,
    ) -> Result<Vec<(String, f64)>> {
        if query.len() != self.dim {
            return Err(Error::InvalidArgument(format!(
                "query vector has {} dims, store has {}",
                query.len(),
                self.dim
            )));
        }
        let mut rows = Vec::with_capacity(pool.len());
        for id in pool {
            rows.push(self.require_row(id, "embedding")?);
        }
        rows.sort_unstable();
        rows.dedup();
        if k > rows.len() {
            return Err(Error::InvalidArgument(format!(
                "k = {k} but pool has {} distinct members",
                rows.len()
            )));
        }
        let top = self.scan_top_k(query, &rows, k, Metric::Euclidean);
        Ok(top
            .into_iter()
            .map(|(row, distance)| (self.ids[row].clone(), distance))
            .collect())
    }

    /// Exact top-k scan over candidate rows. Chunked in parallel; each chunk
    /// yields its sorted top-k and chunks merge under the total order
    /// (distance, ascending id), so any reduction order — hence any thread
    /// count — produces the same result.
    fn scan_top_k(
        &self,
        query: &[f32],
        candidates: &[usize],
        k: usize,
        metric: Metric,
    ) -> Vec<(usize, f64)> {
        const CHUNK: usize = 4096;
        let top = |chunk: &[usize]| -> Vec<(usize, f64)> {
            let mut scored: Vec<(usize, f64)> = chunk
                .iter()
                .map(|&row| (row, distance(metric, query, self.row(row))))
                .collect();
            self.sort_scored(&mut scored);
            scored.truncate(k);
            scored
        };
        if candidates.len() <= CHUNK {
            return top(candidates);
        }
        candidates
            .par_chunks(CHUNK)
            .map(top)
            .reduce(Vec::new, |a, b| self.merge_top_k(a, b, k))
    }

    fn sort_scored(&self, scored: &mut [(usize, f64)]) {
        scored.sort_by(|&(row_a, dist_a), &(row_b, dist_b)| {
            dist_a
                .total_cmp(&dist_b)
                .then_with(|| self.ids[row_a].cmp(&self.ids[row_b]))
        });
    }

    fn merge_top_k(
        &self,
        a: Vec<(usize, f64)>,
        b: Vec<(usize, f64)>,
        k: usize,
    ) -> Vec<(usize, f64)> {
        let mut merged = a;
        merged.extend(b);
        self.sort_scored(&mut merged);
        merged.truncate(k);
        merged
    }
}

fn l2_norm(row: &[f32]) -> f64 {
    row.iter()
        .map(|&x| {
            let x = x as f64;
            x * x
        })
        .sum::<f64>()
        .sqrt()
}

fn distance(metric: Metric, a: &[f32], b: &[f32]) -> f64 {
    match metric {
        Metric::Euclidean => a
            .iter()
            .zip(b)
            .map(|(&x, &y)| {
                let d = x as f64 - y as f64;
                d * d
            })
            .sum::<f64>()
            .sqrt(),
        Metric::CosineDistance => {
            let dot: f64 = a.iter().zip(b).map(|(&x, &y)| x as f64 * y as f64).sum();
            let na = l2_norm(a);
            let nb = l2_norm(b);
            if na == 0.0 || nb == 0.0 {
                // A zero vector has no direction; treat it as orthogonal.
                1.0
            } else {
                1.0 - dot / (na * nb)
            }
        }
    }
}
