//! `verify` — check that synthetic edits carry their target gender and stay
//! retrievable: zero-shot gender accuracy plus caption-to-image R@{1,5,10}
//! for the contrast set's original images and their edits.

use std::collections::BTreeSet;
use std::fs;

use anyhow::{bail, ensure, Context, Result};
use serde::Serialize;

use genbias_core::corpus::{read_contrast_set_csv, Corpus, Gender, Origin};
use genbias_core::embed::EmbeddingStore;
use genbias_core::retrieval::{embedding_retrieve, recall_at_k, zero_shot_gender, Query, RetrievalRun};

use crate::config::{required_path, RunConfig};
use crate::outputs::Outputs;

const RECALL_KS: [usize; 3] = [1, 5, 10];

/// One verified dataset variant: the contrast set's bases or its edits.
#[derive(Debug, Serialize)]
struct VariantReport {
    variant: String,
    n: usize,
    zs_accuracy: f64,
    /// Recall@{1,5,10}; a cutoff larger than the pool is reported as absent.
    recalls: [Option<f64>; 3],
}

/// The images one variant verifies: `(image_id, expected_gender)`.
fn variant_targets(corpus: &Corpus, variant: &str, ids: &[String]) -> Result<Vec<(String, Gender)>> {
    ids.iter()
        .map(|id| {
            let record = corpus
                .get(id)
                .with_context(|| format!("contrast-set id {id:?} is not in the corpus"))?;
            let expected = match &record.origin {
                Origin::Real => {
                    ensure!(
                        variant == "original",
                        "contrast-set edit {id:?} is a real record"
                    );
                    record.gender_label.as_gender().with_context(|| {
                        format!("contrast-set base {id:?} has no gender label")
                    })?
                }
                Origin::Synthetic { target_gender, .. } => {
                    ensure!(
                        variant == "synthetic",
                        "contrast-set base {id:?} is a synthetic record"
                    );
                    *target_gender
                }
            };
            Ok((id.clone(), expected))
        })
        .collect()
}

fn evaluate_variant(
    corpus: &Corpus,
    variant: &str,
    targets: &[(String, Gender)],
    image_store: &EmbeddingStore,
    prompt_store: &EmbeddingStore,
    query_store: &EmbeddingStore,
) -> Result<VariantReport> {
    ensure!(!targets.is_empty(), "the {variant} variant has no images");

    let mut zs_hits = 0usize;
    for (id, expected) in targets {
        let predicted = zero_shot_gender(image_store, prompt_store, id)
            .with_context(|| format!("zero-shot classification of {id:?}"))?;
        if predicted == *expected {
            zs_hits += 1;
        }
    }

    // Retrieval pool: the variant's targets plus every real corpus image
    // that has an embedding (the distractors).
    let mut pool: BTreeSet<String> = targets.iter().map(|(id, _)| id.clone()).collect();
    pool.extend(
        corpus
            .records()
            .iter()
            .filter(|r| r.origin.is_real() && image_store.contains(&r.id))
            .map(|r| r.id.clone()),
    );
    let pool: Vec<String> = pool.into_iter().collect();
    let k_rank = RECALL_KS
        .into_iter()
        .filter(|&k| k <= pool.len())
        .max()
        .with_context(|| format!("pool of {} images cannot support Recall@1", pool.len()))?;

    let mut queries = Vec::with_capacity(targets.len());
    let mut rankings = Vec::with_capacity(targets.len());
    for (id, expected) in targets {
        let query_id = super::query_id_in(query_store, id)?;
        rankings.push(embedding_retrieve(query_store, image_store, &query_id, &pool, k_rank)?);
        queries.push(Query {
            query_id,
            source_image_id: id.clone(),
            gender: (*expected).into(),
        });
    }
    let run = RetrievalRun::new(format!("verify-{variant}"), queries, rankings)?;

    let mut recalls = [None; 3];
    for (slot, k) in recalls.iter_mut().zip(RECALL_KS) {
        if k <= k_rank {
            *slot = Some(recall_at_k(&run, k)?);
        }
    }
    Ok(VariantReport {
        variant: variant.to_string(),
        n: targets.len(),
        zs_accuracy: zs_hits as f64 / targets.len() as f64,
        recalls,
    })
}

pub fn run(config: &RunConfig) -> Result<()> {
    let corpus = super::load_corpus(config)?;
    let contrast_path = config.contrast_set_path();
    let contrast = read_contrast_set_csv(&contrast_path)
        .with_context(|| format!("cannot read contrast set {}", contrast_path.display()))?;
    if contrast.is_empty() {
        bail!("contrast set {} holds no pairs", contrast_path.display());
    }

    let section = &config.verify;
    let image_store = super::load_store(
        &required_path(&section.image_manifest, "verify.image_manifest")?,
        &required_path(&section.image_blob, "verify.image_blob")?,
        "image",
    )?;
    let prompt_store = super::load_store(
        &required_path(&section.prompt_manifest, "verify.prompt_manifest")?,
        &required_path(&section.prompt_blob, "verify.prompt_blob")?,
        "prompt",
    )?;
    let query_store = super::load_store(
        &required_path(&section.query_manifest, "verify.query_manifest")?,
        &required_path(&section.query_blob, "verify.query_blob")?,
        "query",
    )?;

    let base_ids: Vec<String> = contrast.pairs().iter().map(|p| p.base_id.clone()).collect();
    let edit_ids: Vec<String> = contrast.edit_ids().map(str::to_string).collect();
    let variants = [
        ("original", variant_targets(&corpus, "original", &base_ids)?),
        ("synthetic", variant_targets(&corpus, "synthetic", &edit_ids)?),
    ];

    let mut rows = Vec::new();
    for (variant, targets) in &variants {
        rows.push(evaluate_variant(
            &corpus,
            variant,
            targets,
            &image_store,
            &prompt_store,
            &query_store,
        )?);
    }

    let mut csv = String::from("variant,n,zs_accuracy,recall_at_1,recall_at_5,recall_at_10\n");
    for row in &rows {
        let cell = |r: Option<f64>| r.map(|v| v.to_string()).unwrap_or_default();
        csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            row.variant,
            row.n,
            row.zs_accuracy,
            cell(row.recalls[0]),
            cell(row.recalls[1]),
            cell(row.recalls[2]),
        ));
    }
    let csv_path = config.out_dir().join("verification_report.csv");
    let mut outputs = Outputs::new();
    fs::write(outputs.stage(csv_path.clone())?, csv)?;
    fs::write(
        outputs.stage(config.out_dir().join("verification_report.json"))?,
        serde_json::to_string_pretty(&rows)?,
    )?;
    super::stage_echo(&mut outputs, config, "verify")?;
    outputs.commit()?;

    println!(
        "{:<10} {:>5} {:>12} {:>8} {:>8} {:>8}",
        "variant", "n", "zs_accuracy", "R@1", "R@5", "R@10"
    );
    for row in &rows {
        let cell = |r: Option<f64>| r.map(|v| format!("{v:.4}")).unwrap_or_else(|| "-".into());
        println!(
            "{:<10} {:>5} {:>12.4} {:>8} {:>8} {:>8}",
            row.variant,
            row.n,
            row.zs_accuracy,
            cell(row.recalls[0]),
            cell(row.recalls[1]),
            cell(row.recalls[2]),
        );
    }
    println!("wrote {}", csv_path.display());
    Ok(())
}
