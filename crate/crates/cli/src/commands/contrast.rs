//! `build-contrast-set` — re-sample the contrast set from an existing
//! decisions file (no rescoring), e.g. under a different seed.

use anyhow::{Context, Result};

use genbias_core::corpus::write_contrast_set_csv;
use genbias_core::filter::read_decisions_csv;

use crate::config::{require_file, RunConfig};
use crate::outputs::Outputs;

pub fn run(config: &RunConfig) -> Result<()> {
    let corpus = super::load_corpus(config)?;
    let decisions_path = config.decisions_path();
    require_file(&decisions_path, "filter decisions (run `genbias filter` first)")?;
    let decisions = read_decisions_csv(&decisions_path)
        .with_context(|| format!("cannot read decisions {}", decisions_path.display()))?;

    let seed = config.seeds[0];
    let contrast = corpus.assemble_contrast_set(&decisions, seed)?;

    let contrast_path = config.contrast_set_path();
    let mut outputs = Outputs::new();
    write_contrast_set_csv(&contrast, &outputs.stage(contrast_path.clone())?)?;
    super::stage_echo(&mut outputs, config, "build-contrast-set")?;
    outputs.commit()?;

    println!(
        "{} contrast pairs from {} decisions (seed {seed}); wrote {}",
        contrast.len(),
        decisions.len(),
        contrast_path.display()
    );
    Ok(())
}
