//! KNN acceptance filter for synthetic gender edits.
//!
//! Every synthetic edit is scored against the combined population of real
//! person crops and synthetic edits (self excluded) in embedding space:
//! `p_real` is the fraction of its k nearest neighbours that are real, and
//! `p_gender` the fraction whose gender matches the edit's target (real
//! neighbours carry their caption-derived labels, synthetic neighbours their
//! edit targets). An edit is accepted iff both statistics strictly exceed
//! their thresholds. Pair retention and one-per-gender sampling are corpus
//! policy ([`Corpus::assemble_contrast_set`]); this module only scores.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Gender, Origin};
use crate::embed::{EmbeddingStore, Metric};
use crate::{Error, Result};

/// Neighbourhood size and acceptance thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterConfig {
    pub k_neighbors: usize,
    pub tau_real: f64,
    pub tau_gender: f64,
    #[serde(default = "default_metric")]
    pub metric: Metric,
}

fn default_metric() -> Metric {
    Metric::Euclidean
}

/// Names of the built-in filter presets.
pub const PRESET_NAMES: [&str; 2] = ["clip-default", "dino-ablation"];

impl FilterConfig {
    /// The CLIP-space preset: K=50, τ_R=0.08, τ_G=0.5.
    pub fn clip_default() -> Self {
        FilterConfig {
            k_neighbors: 50,
            tau_real: 0.08,
            tau_gender: 0.5,
            metric: Metric::Euclidean,
        }
    }

    /// The DINO-space ablation preset: K=5000, τ_R=0.0002, τ_G=0.4.
    pub fn dino_ablation() -> Self {
        FilterConfig {
            k_neighbors: 5000,
            tau_real: 0.0002,
            tau_gender: 0.4,
            metric: Metric::Euclidean,
        }
    }

    /// Looks up a named preset.
    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "clip-default" => Ok(Self::clip_default()),
            "dino-ablation" => Ok(Self::dino_ablation()),
            other => Err(Error::InvalidArgument(format!(
                "unknown filter preset {other:?} (available: {})",
                PRESET_NAMES.join(", ")
            ))),
        }
    }

    /// Checks field ranges (population-size checks happen at use).
    pub fn validate(&self) -> Result<()> {
        if self.k_neighbors == 0 {
            return Err(Error::InvalidArgument("k_neighbors must be positive".into()));
        }
        for (name, tau) in [("tau_real", self.tau_real), ("tau_gender", self.tau_gender)] {
            if !(0.0..=1.0).contains(&tau) {
                return Err(Error::InvalidArgument(format!(
                    "{name} must lie in [0, 1], got {tau}"
                )));
            }
        }
        Ok(())
    }
}

/// The scored verdict for one synthetic edit.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterDecision {
    pub edit_id: String,
    pub base_id: String,
    pub target_gender: Gender,
    pub p_real: f64,
    pub p_gender: f64,
    pub accepted: bool,
}

/// The acceptance rule: strict inequalities on both statistics.
pub fn apply_filter(p_real: f64, p_gender: f64, config: &FilterConfig) -> bool {
    p_real > config.tau_real && p_gender > config.tau_gender
}

/// Computes `(p_real, p_gender)` for one edit over the population R ∪ S minus
/// the edit itself. `genders` must cover every population member (callers use
/// caption labels for reals and edit targets for synthetics).
pub fn neighbor_stats(
    edit_id: &str,
    real_ids: &HashSet<String>,
    synth_ids: &HashSet<String>,
    store: &EmbeddingStore,
    genders: &HashMap<String, Gender>,
    config: &FilterConfig,
) -> Result<(f64, f64)> {
    config.validate()?;
    if !synth_ids.contains(edit_id) {
        return Err(Error::InvalidArgument(format!(
            "edit {edit_id:?} is not in the synthetic id set"
        )));
    }
    let population_size = real_ids.len() + synth_ids.len();
    if population_size < config.k_neighbors + 1 {
        return Err(Error::InvalidArgument(format!(
            "population of {population_size} cannot support k_neighbors = {} (need k+1)",
            config.k_neighbors
        )));
    }
    let edit_gender = *genders.get(edit_id).ok_or_else(|| Error::Record {
        id: edit_id.to_string(),
        detail: "no gender recorded for edit".into(),
    })?;

    let mut population: Vec<String> = Vec::with_capacity(population_size);
    population.extend(real_ids.iter().cloned());
    population.extend(synth_ids.iter().cloned());
    let neighbors = store.knn_among(edit_id, &population, config.k_neighbors, config.metric)?;

    let mut real_hits = 0usize;
    let mut gender_hits = 0usize;
    for (id, _) in &neighbors.neighbors {
        if real_ids.contains(id) {
            real_hits += 1;
        }
        let gender = *genders.get(id).ok_or_else(|| Error::Record {
            id: id.clone(),
            detail: "no gender recorded for population member".into(),
        })?;
        if gender == edit_gender {
            gender_hits += 1;
        }
    }
    let k = config.k_neighbors as f64;
    Ok((real_hits as f64 / k, gender_hits as f64 / k))
}

/// Scores every synthetic record of the corpus against the population of
/// gender-labeled real records plus all synthetic records. Returns one
/// decision per edit, sorted by edit id; deterministic regardless of thread
/// count or input order.
///
/// Errors if any population member lacks an embedding (naming the id), or if
/// the population cannot support the configured neighbourhood.
pub fn filter_dataset(
    corpus: &Corpus,
    store: &EmbeddingStore,
    config: &FilterConfig,
) -> Result<Vec<FilterDecision>> {
    config.validate()?;
    let mut real_ids = HashSet::new();
    let mut synth_ids = HashSet::new();
    let mut genders: HashMap<String, Gender> = HashMap::new();
    let mut edits = Vec::new();
    for record in corpus.records() {
        match &record.origin {
            Origin::Real => {
                // Undefined-labeled reals can neither support nor refute a
                // target gender; they stay out of the population.
                if let Some(gender) = record.gender_label.as_gender() {
                    real_ids.insert(record.id.clone());
                    genders.insert(record.id.clone(), gender);
                }
            }
            Origin::Synthetic {
                target_gender,
                source_id,
                ..
            } => {
                synth_ids.insert(record.id.clone());
                genders.insert(record.id.clone(), *target_gender);
                edits.push((record.id.clone(), source_id.clone(), *target_gender));
            }
        }
    }
    if edits.is_empty() {
        return Ok(Vec::new());
    }
    for id in real_ids.iter().chain(synth_ids.iter()) {
        if !store.contains(id) {
            return Err(Error::UnknownId {
                kind: "embedding",
                id: id.clone(),
            });
        }
    }

    // Corpus records are id-sorted, so `edits` already is; decisions inherit
    // the order no matter how the parallel map schedules work.
    edits
        .par_iter()
        .map(|(edit_id, base_id, target_gender)| {
            let (p_real, p_gender) =
                neighbor_stats(edit_id, &real_ids, &synth_ids, store, &genders, config)?;
            Ok(FilterDecision {
                edit_id: edit_id.clone(),
                base_id: base_id.clone(),
                target_gender: *target_gender,
                p_real,
                p_gender,
                accepted: apply_filter(p_real, p_gender, config),
            })
        })
        .collect()
}

const DECISIONS_HEADER: &str = "edit_id,base_id,target_gender,p_real,p_gender,accepted,p_real_decile";

/// Decile (0–9) of the base-averaged p_real an edit belongs to: all edits
/// sharing a base get the decile of their base's mean p_real.
fn base_mean_deciles(decisions: &[FilterDecision]) -> HashMap<&str, u8> {
    let mut sums: HashMap<&str, (f64, usize)> = HashMap::new();
    for decision in decisions {
        let slot = sums.entry(decision.base_id.as_str()).or_insert((0.0, 0));
        slot.0 += decision.p_real;
        slot.1 += 1;
    }
    sums.into_iter()
        .map(|(base, (sum, count))| {
            let mean = sum / count as f64;
            (base, ((mean * 10.0).floor() as u8).min(9))
        })
        .collect()
}

/// Writes decisions as CSV with a trailing `p_real_decile` column (the decile
/// of the base-averaged p_real, for external grouping/plotting).
pub fn write_decisions_csv(decisions: &[FilterDecision], path: &Path) -> Result<()> {
    let deciles = base_mean_deciles(decisions);
    let mut out = String::from(DECISIONS_HEADER);
    out.push('\n');
    for d in decisions {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            d.edit_id,
            d.base_id,
            d.target_gender,
            d.p_real,
            d.p_gender,
            d.accepted,
            deciles[d.base_id.as_str()]
        ));
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Reads decisions written by [`write_decisions_csv`]. The decile column is
/// derived data and is ignored on read.
pub fn read_decisions_csv(path: &Path) -> Result<Vec<FilterDecision>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    match lines.next() {
        Some(header) if header == DECISIONS_HEADER => {}
        other => {
            return Err(Error::malformed(
                "decisions csv",
                path,
                format!("expected header {DECISIONS_HEADER:?}, found {other:?}"),
            ))
        }
    }
    let mut decisions = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let context =
            |detail: String| Error::malformed("decisions csv", path, format!("line {}: {detail}", lineno + 2));
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 7 {
            return Err(context(format!("expected 7 fields, found {}", fields.len())));
        }
        let parse_prob = |name: &str, field: &str| -> Result<f64> {
            let value: f64 = field
                .parse()
                .map_err(|_| context(format!("{name} {field:?} is not a number")))?;
            if !(0.0..=1.0).contains(&value) {
                return Err(context(format!("{name} {value} outside [0, 1]")));
            }
            Ok(value)
        };
        decisions.push(FilterDecision {
            edit_id: fields[0].to_string(),
            base_id: fields[1].to_string(),
            target_gender: fields[2]
                .parse()
                .map_err(|e: Error| context(e.to_string()))?,
            p_real: parse_prob("p_real", fields[3])?,
            p_gender: parse_prob("p_gender", fields[4])?,
            accepted: match fields[5] {
                "true" => true,
                "false" => false,
                other => return Err(context(format!("accepted {other:?} is not a boolean"))),
            },
        });
    }
    Ok(decisions)
}
