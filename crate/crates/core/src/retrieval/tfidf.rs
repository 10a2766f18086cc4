//! TF-IDF caption-to-caption retrieval (the "fair by construction" model).
//!
//! Documents are individual neutralized captions; images are the retrieval
//! unit, scored as the max cosine similarity over their captions. Weighting
//! is the plain scheme: tf = raw term count, idf = ln(N/df) without
//! smoothing (a term in every document contributes nothing), document and
//! query vectors L2-normalized.

use std::collections::{BTreeMap, HashMap};

use crate::corpus::{text, Corpus};
use crate::{Error, Result};

/// Immutable TF-IDF index over a corpus's captions.
#[derive(Debug, Clone)]
pub struct TfidfIndex {
    /// term → dense term index (terms sorted, so indexing is reproducible).
    vocabulary: HashMap<String, usize>,
    /// idf per term index.
    idf: Vec<f64>,
    /// Per document: sparse L2-normalized vector, term indices ascending.
    doc_vectors: Vec<Vec<(usize, f64)>>,
    /// Per document: index into `image_ids` of the owning image.
    doc_owner: Vec<usize>,
    /// Image ids ascending (corpus order).
    image_ids: Vec<String>,
}

impl TfidfIndex {
    /// Number of indexed documents (captions).
    pub fn doc_count(&self) -> usize {
        self.doc_vectors.len()
    }

    /// Number of distinct terms.
    pub fn vocabulary_len(&self) -> usize {
        self.vocabulary.len()
    }

    /// Whether a (lowercase) term occurs in the vocabulary.
    pub fn contains_term(&self, term: &str) -> bool {
        self.vocabulary.contains_key(term)
    }

    /// The idf of a term, if indexed.
    pub fn idf(&self, term: &str) -> Option<f64> {
        self.vocabulary.get(term).map(|&t| self.idf[t])
    }

    /// Image ids known to the index, ascending.
    pub fn image_ids(&self) -> &[String] {
        &self.image_ids
    }
}

/// Builds a TF-IDF index over every caption of every record. Captions are
/// expected to be neutralized already (the caller applies
/// [`text::neutralize_caption`] or works on a neutralized corpus); the index
/// itself just tokenizes.
pub fn build_tfidf_index(corpus: &Corpus) -> Result<TfidfIndex> {
    if corpus.is_empty() {
        return Err(Error::InvalidArgument(
            "cannot build a TF-IDF index over an empty corpus".into(),
        ));
    }
    // Term counts per document, plus document frequencies.
    let mut doc_counts: Vec<BTreeMap<String, usize>> = Vec::new();
    let mut doc_owner = Vec::new();
    let mut df: BTreeMap<String, usize> = BTreeMap::new();
    let mut image_ids = Vec::with_capacity(corpus.len());
    for (image_index, record) in corpus.records().iter().enumerate() {
        image_ids.push(record.id.clone());
        for caption in &record.captions {
            let mut counts: BTreeMap<String, usize> = BTreeMap::new();
            for token in text::lowercase_tokens(caption) {
                *counts.entry(token).or_default() += 1;
            }
            for term in counts.keys() {
                *df.entry(term.clone()).or_default() += 1;
            }
            doc_counts.push(counts);
            doc_owner.push(image_index);
        }
    }

    let n_docs = doc_counts.len() as f64;
    let mut vocabulary = HashMap::with_capacity(df.len());
    let mut idf = Vec::with_capacity(df.len());
    for (term, term_df) in &df {
        vocabulary.insert(term.clone(), idf.len());
        idf.push((n_docs / *term_df as f64).ln());
    }

    let doc_vectors = doc_counts
        .into_iter()
        .map(|counts| {
            let mut vector: Vec<(usize, f64)> = counts
                .into_iter()
                .map(|(term, tf)| {
                    let t = vocabulary[&term];
                    (t, tf as f64 * idf[t])
                })
                .collect();
            vector.sort_by_key(|&(t, _)| t);
            normalize_sparse(&mut vector);
            vector
        })
        .collect();

    Ok(TfidfIndex {
        vocabulary,
        idf,
        doc_vectors,
        doc_owner,
        image_ids,
    })
}

/// Scales a sparse vector to unit L2 norm; an all-zero vector stays zero.
fn normalize_sparse(vector: &mut Vec<(usize, f64)>) {
    let norm = vector.iter().map(|&(_, w)| w * w).sum::<f64>().sqrt();
    if norm > 0.0 {
        for (_, w) in vector.iter_mut() {
            *w /= norm;
        }
    } else {
        vector.clear();
    }
}

/// Retrieves the top-k images for a query caption by descending cosine
/// similarity; an image's score is the max over its captions. With
/// `exclude_image` given, that image's captions leave the candidate set
/// entirely (excluding an id the index never saw is a no-op). A query sharing
/// no vocabulary with the corpus is legal: every candidate scores 0 and the
/// ranking falls back to ascending image id.
pub fn tfidf_retrieve(
    index: &TfidfIndex,
    query_caption: &str,
    k: usize,
    exclude_image: Option<&str>,
) -> Result<Vec<(String, f64)>> {
    let excluded = exclude_image.and_then(|id| {
        index
            .image_ids
            .binary_search_by(|probe| probe.as_str().cmp(id))
            .ok()
    });
    let candidate_count = index.image_ids.len() - usize::from(excluded.is_some());
    if k == 0 || k > candidate_count {
        return Err(Error::InvalidArgument(format!(
            "k = {k} but the index holds {candidate_count} candidate images"
        )));
    }

    // Sparse query vector in term space, L2-normalized.
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for token in text::lowercase_tokens(query_caption) {
        if let Some(&t) = index.vocabulary.get(&token) {
            *counts.entry(t).or_default() += 1;
        }
    }
    let mut query: Vec<(usize, f64)> = counts
        .into_iter()
        .map(|(t, tf)| (t, tf as f64 * index.idf[t]))
        .collect();
    normalize_sparse(&mut query);

    // Max doc similarity per image. Scores start at 0 so images whose
    // captions share nothing with the query still rank (all-zero case).
    let mut scores = vec![0.0f64; index.image_ids.len()];
    if !query.is_empty() {
        for (doc, vector) in index.doc_vectors.iter().enumerate() {
            let owner = index.doc_owner[doc];
            if Some(owner) == excluded {
                continue;
            }
            let similarity = sparse_dot(&query, vector);
            if similarity > scores[owner] {
                scores[owner] = similarity;
            }
        }
    }

    let mut ranked: Vec<usize> = (0..index.image_ids.len())
        .filter(|&image| Some(image) != excluded)
        .collect();
    // Descending score; ascending id on ties (image_ids is ascending, so the
    // index order is the id order).
    ranked.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    ranked.truncate(k);
    Ok(ranked
        .into_iter()
        .map(|image| (index.image_ids[image].clone(), scores[image]))
        .collect())
}

/// Dot product of two sparse vectors with ascending term indices.
fn sparse_dot(a: &[(usize, f64)], b: &[(usize, f64)]) -> f64 {
    let mut sum = 0.0;
    let mut ia = 0;
    let mut ib = 0;
    while ia < a.len() && ib < b.len() {
        match a[ia].0.cmp(&b[ib].0) {
            std::cmp::Ordering::Less => ia += 1,
            std::cmp::Ordering::Greater => ib += 1,
            std::cmp::Ordering::Equal => {
                sum += a[ia].1 * b[ib].1;
                ia += 1;
                ib += 1;
            }
        }
    }
    sum
}
