//! `cluster-report` — cluster mean caption embeddings and report per-cluster
//! male over-representation with salient terms.

use std::collections::BTreeMap;
use std::fs;

use anyhow::{bail, Context, Result};
use serde_json::json;

use genbias_core::corpus::{Corpus, GenderLabel};
use genbias_core::spurious::{
    average_caption_features, build_cluster_report, kmeans, write_cluster_report_csv, KmeansConfig,
};

use crate::config::{required_path, RunConfig};
use crate::outputs::Outputs;

pub fn run(config: &RunConfig) -> Result<()> {
    let corpus = super::load_corpus(config)?;
    let split = corpus.select_split(config.cluster.split);
    // The study characterizes the dataset itself, so synthetic edits are
    // excluded: a corpus with an injected contrast set clusters the same way
    // as the original data, and no caption embeddings are needed for edits.
    let labeled = Corpus::new(
        split
            .records()
            .iter()
            .filter(|r| r.origin.is_real() && r.gender_label != GenderLabel::Undefined)
            .cloned()
            .collect(),
        split.lexicon().clone(),
    )?;
    if labeled.len() < config.cluster.m {
        bail!(
            "{} gender-labeled {} images cannot form m = {} clusters",
            labeled.len(),
            config.cluster.split,
            config.cluster.m
        );
    }

    let caption_store = super::load_store(
        &required_path(&config.cluster.caption_manifest, "cluster.caption_manifest")?,
        &required_path(&config.cluster.caption_blob, "cluster.caption_blob")?,
        "caption",
    )?;

    // Vectors may be keyed by image id (one per image) or by `<id>#<k>`
    // caption ids (averaged here).
    let image_to_captions: BTreeMap<String, Vec<String>> = labeled
        .records()
        .iter()
        .map(|record| {
            let sources = if caption_store.contains(&record.id) {
                vec![record.id.clone()]
            } else {
                (0..record.captions.len())
                    .map(|k| format!("{}#{k}", record.id))
                    .collect()
            };
            (record.id.clone(), sources)
        })
        .collect();
    let means = average_caption_features(&caption_store, &image_to_captions)
        .context("averaging caption embeddings")?;

    let clustering = kmeans(
        &means,
        &KmeansConfig {
            m: config.cluster.m,
            seed: config.cluster.seed,
            max_iters: config.cluster.max_iters,
        },
    )?;
    let report = build_cluster_report(&labeled, clustering.assignment(), config.cluster.n_terms, None)?;

    let csv_path = config.out_dir().join("cluster_report.csv");
    let mut outputs = Outputs::new();
    write_cluster_report_csv(&report, &outputs.stage(csv_path.clone())?)?;
    let rows: Vec<_> = report
        .clusters
        .iter()
        .map(|c| {
            json!({
                "cluster_index": c.cluster_index,
                "size": c.member_image_ids.len(),
                "male_fraction": c.male_fraction,
                "delta_m": c.delta_m,
                "top_terms": c.top_terms,
            })
        })
        .collect();
    fs::write(
        outputs.stage(config.out_dir().join("cluster_report.json"))?,
        serde_json::to_string_pretty(&rows)?,
    )?;
    super::stage_echo(&mut outputs, config, "cluster-report")?;
    outputs.commit()?;

    println!(
        "{} clusters over {} images; global male rate {:.1}%; final inertia {:.4}",
        report.clusters.len(),
        labeled.len(),
        report.global_male_pct,
        clustering.inertia(),
    );
    let most = |pick_max: bool| {
        report
            .clusters
            .iter()
            .max_by(|a, b| {
                let ord = a.delta_m.total_cmp(&b.delta_m);
                if pick_max {
                    ord
                } else {
                    ord.reverse()
                }
            })
            .expect("at least one cluster")
    };
    for (label, cluster) in [("most male", most(true)), ("most female", most(false))] {
        println!(
            "{label}-overrepresented: cluster {} (ΔM {:+.1} points, {} images): {}",
            cluster.cluster_index,
            cluster.delta_m,
            cluster.member_image_ids.len(),
            cluster.top_terms.join(", ")
        );
    }
    println!("wrote {}", csv_path.display());
    Ok(())
}
