//! `filter` — score every synthetic edit with the KNN filter and assemble
//! the contrast set from the accepted pairs.

use anyhow::{bail, Context, Result};

use genbias_core::corpus::write_contrast_set_csv;
use genbias_core::filter::{filter_dataset, write_decisions_csv};

use crate::config::{required_path, RunConfig};
use crate::outputs::Outputs;

pub fn run(config: &RunConfig) -> Result<()> {
    let corpus = super::load_corpus(config)?;
    if corpus.records().iter().all(|r| r.origin.is_real()) {
        bail!("corpus holds no synthetic edits to filter");
    }
    let manifest = required_path(&config.filter.embedding_manifest, "filter.embedding_manifest")?;
    let blob = required_path(&config.filter.embedding_blob, "filter.embedding_blob")?;
    let store = super::load_store(&manifest, &blob, "crop")?;
    let filter_config = config.filter.resolve()?;

    let decisions = filter_dataset(&corpus, &store, &filter_config)
        .context("KNN filter failed")?;
    let accepted = decisions.iter().filter(|d| d.accepted).count();
    let seed = config.seeds[0];
    let contrast = corpus.assemble_contrast_set(&decisions, seed)?;

    let decisions_path = config.decisions_path();
    let contrast_path = config.contrast_set_path();
    let mut outputs = Outputs::new();
    write_decisions_csv(&decisions, &outputs.stage(decisions_path.clone())?)?;
    write_contrast_set_csv(&contrast, &outputs.stage(contrast_path.clone())?)?;
    super::stage_echo(&mut outputs, config, "filter")?;
    outputs.commit()?;

    println!(
        "scored {} edits with k={} τ_R={} τ_G={}: {} accepted",
        decisions.len(),
        filter_config.k_neighbors,
        filter_config.tau_real,
        filter_config.tau_gender,
        accepted,
    );
    println!(
        "{} contrast pairs (seed {seed}); wrote {} and {}",
        contrast.len(),
        decisions_path.display(),
        contrast_path.display()
    );
    Ok(())
}
