//! Retrieval models and verification measurements.
//!
//! Three ranking models feed the bias metrics: seeded [`random_retrieve`],
//! [`tfidf_retrieve`](crate::retrieval::tfidf_retrieve) over neutralized
//! captions, and [`embedding_retrieve`] over externally encoded vectors.
//! A [`RetrievalRun`] captures per-query rankings in a JSON-lines format so
//! metric computation can be replayed without re-running retrieval.
//!
//! Score conventions per model: embedding retrieval scores are Euclidean
//! distances (ascending), TF-IDF scores are cosine similarities (descending),
//! and random rankings carry the negated rank (descending). Metrics read only
//! the order.

mod tfidf;

pub use tfidf::{build_tfidf_index, tfidf_retrieve, TfidfIndex};

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{Gender, GenderLabel};
use crate::embed::EmbeddingStore;
use crate::{rng, Error, Result};

/// One retrieval query: a caption (or other probe) and the image it came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Query {
    pub query_id: String,
    pub source_image_id: String,
    /// Gender of the source image (undefined allowed).
    pub gender: GenderLabel,
}

/// Ranked results for a set of queries under one model.
#[derive(Debug, Clone, PartialEq)]
pub struct RetrievalRun {
    pub model_tag: String,
    queries: Vec<Query>,
    rankings: Vec<Vec<(String, f64)>>,
}

impl RetrievalRun {
    /// Builds a run, validating that queries and rankings align, rankings
    /// share one length, and scores are monotone in rank (non-increasing or
    /// non-decreasing — each model has one convention).
    pub fn new(
        model_tag: impl Into<String>,
        queries: Vec<Query>,
        rankings: Vec<Vec<(String, f64)>>,
    ) -> Result<Self> {
        if queries.len() != rankings.len() {
            return Err(Error::InvalidArgument(format!(
                "{} queries but {} rankings",
                queries.len(),
                rankings.len()
            )));
        }
        let mut expected_len = None;
        for (query, ranking) in queries.iter().zip(&rankings) {
            let len = ranking.len();
            if len == 0 {
                return Err(Error::InvalidArgument(format!(
                    "query {} has an empty ranking",
                    query.query_id
                )));
            }
            if *expected_len.get_or_insert(len) != len {
                return Err(Error::InvalidArgument(format!(
                    "ranking lengths differ: query {} has {len}, expected {}",
                    query.query_id,
                    expected_len.unwrap()
                )));
            }
            let non_increasing = ranking.windows(2).all(|w| w[0].1 >= w[1].1);
            let non_decreasing = ranking.windows(2).all(|w| w[0].1 <= w[1].1);
            if !non_increasing && !non_decreasing {
                return Err(Error::InvalidArgument(format!(
                    "scores for query {} are not monotone in rank",
                    query.query_id
                )));
            }
        }
        Ok(RetrievalRun {
            model_tag: model_tag.into(),
            queries,
            rankings,
        })
    }

    pub fn queries(&self) -> &[Query] {
        &self.queries
    }

    pub fn rankings(&self) -> &[Vec<(String, f64)>] {
        &self.rankings
    }

    pub fn len(&self) -> usize {
        self.queries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queries.is_empty()
    }

    /// Checks that every ranked image id satisfies `resolves` (typically
    /// membership in the evaluation corpus).
    pub fn validate_ids(&self, mut resolves: impl FnMut(&str) -> bool) -> Result<()> {
        for ranking in &self.rankings {
            for (id, _) in ranking {
                if !resolves(id) {
                    return Err(Error::UnknownId {
                        kind: "image",
                        id: id.clone(),
                    });
                }
            }
        }
        Ok(())
    }

    /// Writes the run as JSON lines: one object per query with fields
    /// `{query_id, source_image_id, gender, ranking}`.
    pub fn write_jsonl(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        for (query, ranking) in self.queries.iter().zip(&self.rankings) {
            let line = RunLine {
                query_id: query.query_id.clone(),
                source_image_id: query.source_image_id.clone(),
                gender: query.gender,
                ranking: ranking.clone(),
            };
            out.push_str(&serde_json::to_string(&line).expect("run serialization cannot fail"));
            out.push('\n');
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    /// Reads a run written by [`RetrievalRun::write_jsonl`]. The model tag is
    /// not part of the line format and must be supplied by the caller.
    pub fn read_jsonl(path: &Path, model_tag: impl Into<String>) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut queries = Vec::new();
        let mut rankings = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            if line.is_empty() {
                continue;
            }
            let parsed: RunLine = serde_json::from_str(line).map_err(|e| {
                Error::malformed(
                    "retrieval run",
                    path,
                    format!("line {}: {e}", lineno + 1),
                )
            })?;
            queries.push(Query {
                query_id: parsed.query_id,
                source_image_id: parsed.source_image_id,
                gender: parsed.gender,
            });
            rankings.push(parsed.ranking);
        }
        RetrievalRun::new(model_tag, queries, rankings)
    }
}

#[derive(Serialize, Deserialize)]
struct RunLine {
    query_id: String,
    source_image_id: String,
    gender: GenderLabel,
    ranking: Vec<(String, f64)>,
}

/// Attaches the conventional random-model scores (negated rank, descending)
/// to a plain ranked id list.
pub fn with_rank_scores(ids: Vec<String>) -> Vec<(String, f64)> {
    ids.into_iter()
        .enumerate()
        .map(|(rank, id)| (id, -(rank as f64)))
        .collect()
}

/// Draws a uniform random ranking of `k` distinct pool members. The pool is
/// treated as a set (sorted, deduplicated) so the outcome depends only on its
/// contents and the seed.
pub fn random_retrieve(pool: &[String], k: usize, seed: u64) -> Result<Vec<String>> {
    let mut members: Vec<&String> = pool.iter().collect();
    members.sort_unstable();
    members.dedup();
    if k > members.len() {
        return Err(Error::InvalidArgument(format!(
            "k = {k} but pool has {} distinct members",
            members.len()
        )));
    }
    let mut rng = rng::seeded(seed);
    Ok(rng::sample_indices(&mut rng, members.len(), k)
        .into_iter()
        .map(|i| members[i].clone())
        .collect())
}

/// Ranks an image pool by similarity to a stored caption vector. Both stores
/// must be normalized with equal dimensions; scores are Euclidean distances
/// (ascending), which on normalized vectors orders identically to descending
/// cosine similarity.
pub fn embedding_retrieve(
    caption_store: &EmbeddingStore,
    image_store: &EmbeddingStore,
    query_id: &str,
    pool: &[String],
    k: usize,
) -> Result<Vec<(String, f64)>> {
    if !caption_store.is_normalized() || !image_store.is_normalized() {
        return Err(Error::InvalidArgument(
            "embedding retrieval requires normalized caption and image stores".into(),
        ));
    }
    if caption_store.dim() != image_store.dim() {
        return Err(Error::InvalidArgument(format!(
            "caption store dim {} ≠ image store dim {}",
            caption_store.dim(),
            image_store.dim()
        )));
    }
    let query = caption_store
        .vector(query_id)
        .ok_or_else(|| Error::UnknownId {
            kind: "caption",
            id: query_id.to_string(),
        })?;
    image_store.rank_by_similarity(query, pool, k)
}

/// Recall@K over a run: the fraction of queries whose source image appears in
/// the top-k of their ranking.
pub fn recall_at_k(run: &RetrievalRun, k: usize) -> Result<f64> {
    if run.is_empty() {
        return Err(Error::InvalidArgument(
            "Recall@K over an empty query set is undefined".into(),
        ));
    }
    let mut hits = 0usize;
    for (query, ranking) in run.queries().iter().zip(run.rankings()) {
        if k == 0 || ranking.len() < k {
            return Err(Error::InvalidArgument(format!(
                "ranking holds {} results but k = {k}",
                ranking.len()
            )));
        }
        if ranking[..k].iter().any(|(id, _)| *id == query.source_image_id) {
            hits += 1;
        }
    }
    Ok(hits as f64 / run.len() as f64)
}

/// Id under which the male prompt vector is stored in a prompt store.
pub const MALE_PROMPT_ID: &str = "male";
/// Id under which the female prompt vector is stored in a prompt store.
pub const FEMALE_PROMPT_ID: &str = "female";

/// Zero-shot gender prediction: the gender whose prompt vector has the higher
/// cosine similarity to the image vector. Both stores must be normalized; the
/// prompt store holds exactly one vector per class under the ids `male` and
/// `female` (prompt-template averaging happens upstream). Ties go to male.
pub fn zero_shot_gender(
    image_store: &EmbeddingStore,
    prompt_store: &EmbeddingStore,
    image_id: &str,
) -> Result<Gender> {
    if !image_store.is_normalized() || !prompt_store.is_normalized() {
        return Err(Error::InvalidArgument(
            "zero-shot classification requires normalized stores".into(),
        ));
    }
    if image_store.dim() != prompt_store.dim() {
        return Err(Error::InvalidArgument(format!(
            "image store dim {} ≠ prompt store dim {}",
            image_store.dim(),
            prompt_store.dim()
        )));
    }
    let image = image_store.vector(image_id).ok_or_else(|| Error::UnknownId {
        kind: "image",
        id: image_id.to_string(),
    })?;
    let prompt = |class: &'static str| -> Result<&[f32]> {
        prompt_store.vector(class).ok_or_else(|| {
            Error::InvalidArgument(format!(
                "prompt store is missing the {class:?} class vector"
            ))
        })
    };
    let dot = |a: &[f32], b: &[f32]| -> f64 {
        a.iter().zip(b).map(|(&x, &y)| x as f64 * y as f64).sum()
    };
    let male = dot(image, prompt(MALE_PROMPT_ID)?);
    let female = dot(image, prompt(FEMALE_PROMPT_ID)?);
    Ok(if male >= female {
        Gender::Male
    } else {
        Gender::Female
    })
}
