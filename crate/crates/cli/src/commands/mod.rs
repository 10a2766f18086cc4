//! Subcommand implementations. Each command reads what it needs from the
//! [`RunConfig`](crate::config::RunConfig), stages its outputs (including the
//! resolved-config echo) through [`Outputs`](crate::outputs::Outputs), and
//! prints a short human summary; file formats live in the core crate.

pub mod cluster;
pub mod contrast;
pub mod eval_bias;
pub mod filter;
pub mod label;
pub mod neutralize;
pub mod probe;
pub mod verify;

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};

use genbias_core::corpus::{read_corpus_tsv, Corpus};
use genbias_core::embed::EmbeddingStore;

use crate::config::{require_file, RunConfig};
use crate::outputs::Outputs;

/// Loads the labeled corpus every post-`label` command starts from.
fn load_corpus(config: &RunConfig) -> Result<Corpus> {
    let path = config.corpus_path();
    require_file(&path, "labeled corpus (run `genbias label` first)")?;
    read_corpus_tsv(&path, config.lexicon()?)
        .with_context(|| format!("cannot read corpus {}", path.display()))
}

/// Loads an embedding store, naming the manifest in any failure.
fn load_store(manifest: &Path, blob: &Path, what: &str) -> Result<EmbeddingStore> {
    require_file(manifest, &format!("{what} manifest"))?;
    require_file(blob, &format!("{what} blob"))?;
    EmbeddingStore::load(manifest, blob)
        .with_context(|| format!("cannot load {what} embeddings from {}", manifest.display()))
}

/// Resolves the id a query vector is stored under: the image id itself, or
/// the image's first caption id.
fn query_id_in(store: &EmbeddingStore, image_id: &str) -> Result<String> {
    if store.contains(image_id) {
        return Ok(image_id.to_string());
    }
    let caption_id = format!("{image_id}#0");
    if store.contains(&caption_id) {
        return Ok(caption_id);
    }
    bail!("no query vector for image {image_id:?} (looked for {image_id:?} and {caption_id:?})");
}

/// Stages the resolved-config echo next to a command's outputs.
fn stage_echo(
    outputs: &mut Outputs,
    config: &RunConfig,
    command: &str,
) -> Result<()> {
    let path = outputs.stage(config.out_dir().join(format!("{command}-config.toml")))?;
    fs::write(&path, config.echo())
        .with_context(|| format!("cannot write config echo {}", path.display()))?;
    Ok(())
}
