//! `label` — ingest annotation files, derive gender labels, export the corpus.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};

use genbias_core::corpus::{load_annotations, write_corpus_tsv, Corpus, GenderLabel, Split};

use crate::config::{require_file, RunConfig};
use crate::outputs::Outputs;

pub fn run(config: &RunConfig) -> Result<()> {
    let lexicon = config.lexicon()?;
    let splits: Vec<(Split, &Option<PathBuf>, &Option<PathBuf>)> = vec![
        (Split::Train, &config.paths.captions_train, &config.paths.instances_train),
        (Split::Val, &config.paths.captions_val, &config.paths.instances_val),
    ];

    let mut records = Vec::new();
    let mut loaded_any = false;
    for (split, captions, instances) in splits {
        let (captions, instances) = match (captions, instances) {
            (Some(c), Some(i)) => (c, i),
            (None, None) => continue,
            _ => bail!("config has only one of captions_{split} / instances_{split}"),
        };
        require_file(captions, &format!("{split} captions file"))?;
        require_file(instances, &format!("{split} instances file"))?;
        let corpus = load_annotations(captions, instances, split, lexicon.clone())
            .with_context(|| format!("cannot ingest {split} annotations"))?;
        records.extend(corpus.records().iter().cloned());
        loaded_any = true;
    }
    if !loaded_any {
        bail!("config names no annotation files (paths.captions_train/val + instances_train/val)");
    }

    let mut corpus = Corpus::new(records, lexicon)?;
    corpus.assign_gender_labels();

    let mut outputs = Outputs::new();
    let staged = outputs.stage(config.corpus_path())?;
    write_corpus_tsv(&corpus, &staged)?;
    super::stage_echo(&mut outputs, config, "label")?;
    outputs.commit()?;

    for split in [Split::Train, Split::Val] {
        let subset = corpus.select_split(split);
        if subset.is_empty() {
            continue;
        }
        let count = |label: GenderLabel| {
            subset
                .records()
                .iter()
                .filter(|r| r.gender_label == label)
                .count()
        };
        println!(
            "{split}: {} images — male {} / female {} / undefined {}",
            subset.len(),
            count(GenderLabel::Male),
            count(GenderLabel::Female),
            count(GenderLabel::Undefined),
        );
    }
    println!("wrote {}", config.corpus_path().display());
    Ok(())
}
