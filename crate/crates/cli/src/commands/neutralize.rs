//! `neutralize` — export the gender-neutralized twin of the labeled corpus.

use anyhow::Result;

use genbias_core::corpus::write_corpus_tsv;

use crate::config::RunConfig;
use crate::outputs::Outputs;

pub fn run(config: &RunConfig) -> Result<()> {
    let corpus = super::load_corpus(config)?;
    let neutral = corpus.neutralized();

    let changed: usize = corpus
        .records()
        .iter()
        .zip(neutral.records())
        .map(|(before, after)| {
            before
                .captions
                .iter()
                .zip(&after.captions)
                .filter(|(b, a)| b != a)
                .count()
        })
        .sum();

    let target = config.out_dir().join("corpus_neutralized.tsv");
    let mut outputs = Outputs::new();
    let staged = outputs.stage(target.clone())?;
    write_corpus_tsv(&neutral, &staged)?;
    super::stage_echo(&mut outputs, config, "neutralize")?;
    outputs.commit()?;

    println!(
        "neutralized {} images ({} captions rewritten); wrote {}",
        neutral.len(),
        changed,
        target.display()
    );
    Ok(())
}
