//! Measurement toolkit for gender bias in image–text retrieval.
//!
//! The crate covers the full evaluation loop around a captioned image corpus
//! (COCO-style annotations) and externally computed embeddings:
//!
//! * [`corpus`] — annotation ingestion, caption-derived gender labels, a
//!   gendered-word lexicon with neutralization / gender-swap rewrites, subset
//!   selection, and a TSV interchange format.
//! * [`embed`] — a flat f32 embedding store with a JSON + binary-blob file
//!   format, exact k-nearest-neighbour scans and similarity ranking.
//! * [`retrieval`] — ranking models over a corpus (seeded random, TF-IDF over
//!   neutralized captions, embedding similarity), retrieval-run serialization,
//!   recall and zero-shot gender prediction.
//! * [`metrics`] — Bias@K, Skew@K and MaxSkew@K with the tie and skip rules
//!   spelled out, plus seed aggregation and report files.
//! * [`filter`] — the KNN-based acceptance filter for synthetic gender-edited
//!   images and contrast-set assembly support.
//! * [`spurious`] — caption-embedding clustering (k-means), per-cluster gender
//!   over-representation, characteristic terms, and a bag-of-words logistic
//!   probe with AUC evaluation.
//!
//! Everything downstream of a seed is bit-deterministic: identical inputs,
//! configuration and seeds produce identical files on every run, regardless of
//! thread count. Functions that consume randomness take explicit `u64` seeds;
//! nothing reads ambient entropy.

pub mod corpus;
pub mod embed;
mod error;
pub mod filter;
pub mod metrics;
pub mod retrieval;
pub mod rng;
pub mod spurious;

pub use error::{Error, Result};
