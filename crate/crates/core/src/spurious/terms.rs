//! Salient-term ranking for cluster labeling.
//!
//! Clusters are summarized by the words whose in-cluster frequency most
//! exceeds their background frequency, measured by add-1-smoothed log-odds.
//! Deterministic, and readable off the counts directly.

use std::collections::{BTreeMap, BTreeSet};

use crate::corpus::text::lowercase_tokens;

fn counts(captions: &[String]) -> (BTreeMap<String, usize>, usize) {
    let mut map = BTreeMap::new();
    let mut total = 0usize;
    for caption in captions {
        for token in lowercase_tokens(caption) {
            *map.entry(token).or_insert(0) += 1;
            total += 1;
        }
    }
    (map, total)
}

/// Ranks words by the log-odds of appearing in the cluster's captions versus
/// the background captions, with add-1 smoothing over the joint vocabulary.
/// Returns the top `n` (fewer if the vocabulary is smaller); score ties break
/// by ascending word. An empty cluster yields an empty list.
pub fn top_terms(cluster: &[String], background: &[String], n: usize) -> Vec<String> {
    let (cluster_counts, cluster_total) = counts(cluster);
    let (background_counts, background_total) = counts(background);
    if cluster_counts.is_empty() {
        return Vec::new();
    }
    let vocabulary: BTreeSet<&String> =
        cluster_counts.keys().chain(background_counts.keys()).collect();
    let v = vocabulary.len() as f64;
    let cluster_denom = cluster_total as f64 + v;
    let background_denom = background_total as f64 + v;

    let mut scored: Vec<(f64, &String)> = vocabulary
        .into_iter()
        .map(|word| {
            let in_cluster = (cluster_counts.get(word).copied().unwrap_or(0) + 1) as f64;
            let in_background = (background_counts.get(word).copied().unwrap_or(0) + 1) as f64;
            let score = (in_cluster / cluster_denom).ln() - (in_background / background_denom).ln();
            (score, word)
        })
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(b.1)));
    scored.into_iter().take(n).map(|(_, word)| word.clone()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn captions(texts: &[&str]) -> Vec<String> {
        texts.iter().map(|t| t.to_string()).collect()
    }

    #[test]
    fn cluster_only_word_outranks_equally_frequent_shared_word() {
        let cluster = captions(&["skateboard ramp", "skateboard ramp"]);
        let background = captions(&["ramp paint", "ramp paint"]);
        let terms = top_terms(&cluster, &background, 3);
        assert_eq!(terms[0], "skateboard");
        assert!(
            terms.iter().position(|t| t == "skateboard")
                < terms.iter().position(|t| t == "ramp")
        );
    }

    #[test]
    fn uniform_distribution_falls_back_to_alphabetical() {
        let text = captions(&["delta alpha charlie bravo"]);
        let terms = top_terms(&text, &text, 4);
        assert_eq!(terms, ["alpha", "bravo", "charlie", "delta"]);
    }

    #[test]
    fn tennis_fixture_surfaces_the_sport_terms() {
        let cluster = captions(&[
            "A person swinging a tennis racket on a court.",
            "A person holds a tennis racket above the net.",
            "The person serves during a tennis match.",
            "A person with a racket waits for the tennis ball.",
        ]);
        let background = captions(&[
            "A person riding a horse on the beach.",
            "A person cooking dinner in a small kitchen.",
            "The person reads a book on the couch.",
            "A person walking a dog down the street.",
            "A person eating a sandwich at the table.",
        ]);
        let terms = top_terms(&cluster, &background, 5);
        assert!(terms.contains(&"tennis".to_string()), "terms: {terms:?}");
        assert!(terms.contains(&"racket".to_string()), "terms: {terms:?}");
    }

    #[test]
    fn empty_cluster_yields_no_terms() {
        assert!(top_terms(&[], &captions(&["anything at all"]), 5).is_empty());
    }

    #[test]
    fn n_caps_the_list_and_large_n_returns_all() {
        let cluster = captions(&["one two three"]);
        assert_eq!(top_terms(&cluster, &[], 2).len(), 2);
        assert_eq!(top_terms(&cluster, &[], 50).len(), 3);
    }
}
