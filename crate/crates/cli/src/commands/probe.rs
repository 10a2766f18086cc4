//! `probe` — train the bag-of-words gender probe on neutralized train-split
//! captions and report AUC on the val split.

use std::fs;

use anyhow::{bail, Context, Result};
use serde_json::json;

use genbias_core::corpus::text::neutralize_caption;
use genbias_core::corpus::{Corpus, Gender, Split};
use genbias_core::spurious::{auc, train_probe, ProbeModel};

use crate::config::RunConfig;
use crate::outputs::Outputs;

/// `(neutralized caption, gender)` pairs from a split's labeled real
/// records. Synthetic edits are excluded: the probe measures what the
/// dataset's own captions reveal, and edit-pipeline caption templates would
/// contaminate that signal.
fn examples(corpus: &Corpus, split: Split) -> Vec<(String, Gender)> {
    corpus
        .select_split(split)
        .records()
        .iter()
        .filter(|record| record.origin.is_real())
        .filter_map(|record| {
            record
                .gender_label
                .as_gender()
                .map(|gender| (record, gender))
        })
        .flat_map(|(record, gender)| {
            record
                .captions
                .iter()
                .map(move |caption| (neutralize_caption(caption, corpus.lexicon()), gender))
                .collect::<Vec<_>>()
        })
        .collect()
}

fn split_auc(model: &ProbeModel, examples: &[(String, Gender)]) -> Result<f64> {
    let scores: Vec<f64> = examples.iter().map(|(caption, _)| model.score(caption)).collect();
    let labels: Vec<bool> = examples
        .iter()
        .map(|(_, gender)| *gender == Gender::Male)
        .collect();
    Ok(auc(&scores, &labels)?)
}

pub fn run(config: &RunConfig) -> Result<()> {
    let corpus = super::load_corpus(config)?;
    let train = examples(&corpus, Split::Train);
    let val = examples(&corpus, Split::Val);
    if train.is_empty() || val.is_empty() {
        bail!(
            "probe needs labeled captions in both splits (train {}, val {})",
            train.len(),
            val.len()
        );
    }

    let hyper = config.probe.hyper();
    let (model, losses) = train_probe(&train, corpus.lexicon(), &hyper)
        .context("probe training failed")?;
    let train_auc = split_auc(&model, &train)?;
    let val_auc = split_auc(&model, &val)?;

    let model_path = config.out_dir().join("probe_model.tsv");
    let mut outputs = Outputs::new();
    model.write_tsv(&outputs.stage(model_path.clone())?)?;
    let csv = format!(
        "split,n_captions,auc\ntrain,{},{train_auc}\nval,{},{val_auc}\n",
        train.len(),
        val.len()
    );
    fs::write(outputs.stage(config.out_dir().join("probe_report.csv"))?, csv)?;
    let report = json!([
        {"split": "train", "n_captions": train.len(), "auc": train_auc},
        {"split": "val", "n_captions": val.len(), "auc": val_auc},
    ]);
    fs::write(
        outputs.stage(config.out_dir().join("probe_report.json"))?,
        serde_json::to_string_pretty(&report)?,
    )?;
    super::stage_echo(&mut outputs, config, "probe")?;
    outputs.commit()?;

    println!(
        "trained on {} captions ({} words, {} epochs, final loss {:.4})",
        train.len(),
        model.vocabulary_len(),
        hyper.epochs,
        losses.last().expect("at least the initial loss"),
    );
    println!("train AUC {train_auc:.4}; val AUC {val_auc:.4}");
    println!("wrote {}", model_path.display());
    Ok(())
}
