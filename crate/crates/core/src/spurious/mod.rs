//! Context–gender correlation analysis.
//!
//! The pipeline: average each image's caption embeddings into one vector,
//! cluster those vectors with seeded k-means, measure per-cluster male
//! over-representation against the global rate, attach salient terms for
//! human inspection, and — separately — train a bag-of-words probe that
//! predicts gender from neutralized captions alone. Every step is
//! deterministic; none of it requires labels beyond the caption-derived ones.

mod kmeans;
mod probe;
mod terms;

pub use kmeans::{kmeans, KmeansConfig, KmeansResult};
pub use probe::{auc, train_probe, ProbeHyper, ProbeModel};
pub use terms::top_terms;

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;

use crate::corpus::text::neutralize_caption;
use crate::corpus::{Corpus, Gender, GenderLabel};
use crate::embed::EmbeddingStore;
use crate::{Error, Result};

/// Builds one vector per image: the arithmetic mean of its caption vectors
/// (accumulated in f64, stored back as f32). Output ids are the map's image
/// ids, ascending; the result is not renormalized.
pub fn average_caption_features(
    caption_store: &EmbeddingStore,
    image_to_captions: &BTreeMap<String, Vec<String>>,
) -> Result<EmbeddingStore> {
    let dim = caption_store.dim();
    let mut ids = Vec::with_capacity(image_to_captions.len());
    let mut data = Vec::with_capacity(image_to_captions.len() * dim);
    for (image_id, caption_ids) in image_to_captions {
        if caption_ids.is_empty() {
            return Err(Error::Record {
                id: image_id.clone(),
                detail: "image has no captions to average".into(),
            });
        }
        let mut sum = vec![0.0f64; dim];
        for caption_id in caption_ids {
            let vector = caption_store
                .vector(caption_id)
                .ok_or_else(|| Error::UnknownId {
                    kind: "caption",
                    id: caption_id.clone(),
                })?;
            for (slot, &x) in sum.iter_mut().zip(vector) {
                *slot += f64::from(x);
            }
        }
        ids.push(image_id.clone());
        let count = caption_ids.len() as f64;
        data.extend(sum.into_iter().map(|value| (value / count) as f32));
    }
    EmbeddingStore::from_rows(ids, dim, data, false)
}

/// Per-cluster male over-representation in percentage points:
/// `delta_m(c) = 100 · male_fraction(c) − global_male_pct`. Every assigned id
/// must have a gender; clusters with no members simply don't appear.
pub fn overrepresentation(
    assignment: &BTreeMap<String, usize>,
    labels: &HashMap<String, Gender>,
    global_male_pct: f64,
) -> Result<BTreeMap<usize, f64>> {
    let mut totals: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
    for (id, &cluster) in assignment {
        let gender = labels.get(id).ok_or_else(|| Error::Record {
            id: id.clone(),
            detail: "assigned image has no gender label".into(),
        })?;
        let slot = totals.entry(cluster).or_insert((0, 0));
        slot.0 += 1;
        if *gender == Gender::Male {
            slot.1 += 1;
        }
    }
    Ok(totals
        .into_iter()
        .map(|(cluster, (size, males))| {
            (cluster, 100.0 * males as f64 / size as f64 - global_male_pct)
        })
        .collect())
}

/// One cluster's row in the analysis report.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterEntry {
    pub cluster_index: usize,
    pub member_image_ids: Vec<String>,
    pub male_fraction: f64,
    /// Signed percentage points above (+) or below (−) the global male rate.
    pub delta_m: f64,
    pub top_terms: Vec<String>,
    /// Optional human-assigned label; reports are built without one.
    pub name: Option<String>,
}

/// The clustered view of a labeled corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterReport {
    pub clusters: Vec<ClusterEntry>,
    pub global_male_pct: f64,
}

/// Assembles the cluster report: members, male fractions, over-representation
/// against the global rate over all assigned images, and the `n_terms` most
/// cluster-salient caption words (each cluster's captions are neutralized and
/// scored against the captions of every other assigned image). Every assigned
/// id must resolve to a gender-labeled record.
pub fn build_cluster_report(
    corpus: &Corpus,
    assignment: &BTreeMap<String, usize>,
    n_terms: usize,
    names: Option<&BTreeMap<usize, String>>,
) -> Result<ClusterReport> {
    if assignment.is_empty() {
        return Err(Error::InvalidArgument(
            "cannot report on an empty cluster assignment".into(),
        ));
    }
    let mut members: BTreeMap<usize, Vec<String>> = BTreeMap::new();
    let mut males = 0usize;
    for (id, &cluster) in assignment {
        let record = corpus.get(id).ok_or_else(|| Error::UnknownId {
            kind: "image",
            id: id.clone(),
        })?;
        match record.gender_label {
            GenderLabel::Male => males += 1,
            GenderLabel::Female => {}
            GenderLabel::Undefined => {
                return Err(Error::Record {
                    id: id.clone(),
                    detail: "assigned image has no gender label".into(),
                })
            }
        }
        members.entry(cluster).or_default().push(id.clone());
    }
    let global_male_pct = 100.0 * males as f64 / assignment.len() as f64;

    let neutralized_captions = |ids: &[String]| -> Vec<String> {
        ids.iter()
            .flat_map(|id| corpus.get(id).expect("validated above").captions.iter())
            .map(|caption| neutralize_caption(caption, corpus.lexicon()))
            .collect()
    };
    let mut clusters = Vec::with_capacity(members.len());
    for (&cluster_index, ids) in &members {
        let cluster_males = ids
            .iter()
            .filter(|id| corpus.get(id).expect("validated above").gender_label == GenderLabel::Male)
            .count();
        let male_fraction = cluster_males as f64 / ids.len() as f64;
        let complement: Vec<String> = members
            .iter()
            .filter(|&(&other, _)| other != cluster_index)
            .flat_map(|(_, ids)| ids.iter().cloned())
            .collect();
        clusters.push(ClusterEntry {
            cluster_index,
            member_image_ids: ids.clone(),
            male_fraction,
            delta_m: 100.0 * male_fraction - global_male_pct,
            top_terms: top_terms(
                &neutralized_captions(ids),
                &neutralized_captions(&complement),
                n_terms,
            ),
            name: names.and_then(|map| map.get(&cluster_index).cloned()),
        });
    }
    Ok(ClusterReport {
        clusters,
        global_male_pct,
    })
}

/// Writes the report as CSV: one row per cluster, terms semicolon-joined.
pub fn write_cluster_report_csv(report: &ClusterReport, path: &Path) -> Result<()> {
    let mut out = String::from("cluster_index,size,male_fraction,delta_m,top_terms\n");
    for cluster in &report.clusters {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            cluster.cluster_index,
            cluster.member_image_ids.len(),
            cluster.male_fraction,
            cluster.delta_m,
            cluster.top_terms.join(";")
        ));
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}
