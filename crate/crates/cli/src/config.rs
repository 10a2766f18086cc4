//! Run configuration: one TOML file describing every path, tag, and
//! hyperparameter a command needs, so a benchmark run is reproducible from a
//! single artifact. Command-line flags override individual fields; the fully
//! resolved config is echoed beside every command's outputs.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use genbias_core::corpus::Split;
use genbias_core::filter::FilterConfig;
use genbias_core::spurious::ProbeHyper;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Tag under which this dataset appears in report rows.
    pub dataset_tag: String,
    /// Seeds for every randomized step. Non-empty; the first seed drives
    /// single-sample steps (contrast-pair selection).
    pub seeds: Vec<u64>,
    pub paths: Paths,
    pub eval: EvalSection,
    /// Embedding-model stores for `eval-bias`, keyed by model tag.
    pub models: BTreeMap<String, ModelPaths>,
    pub filter: FilterSection,
    pub verify: VerifySection,
    pub cluster: ClusterSection,
    pub probe: ProbeSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            dataset_tag: "dataset".into(),
            seeds: vec![0],
            paths: Paths::default(),
            eval: EvalSection::default(),
            models: BTreeMap::new(),
            filter: FilterSection::default(),
            verify: VerifySection::default(),
            cluster: ClusterSection::default(),
            probe: ProbeSection::default(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Paths {
    /// Where every command writes its outputs (created on demand).
    pub out_dir: PathBuf,
    /// Gendered-word lexicon TSV; the built-in lexicon when absent.
    pub lexicon: Option<PathBuf>,
    /// Labeled corpus TSV — written by `label`, read by everything else.
    /// Defaults to `<out_dir>/corpus.tsv`.
    pub corpus: Option<PathBuf>,
    pub captions_train: Option<PathBuf>,
    pub instances_train: Option<PathBuf>,
    pub captions_val: Option<PathBuf>,
    pub instances_val: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalSection {
    /// Split whose images form the evaluation pool.
    pub split: Split,
    /// Metric cutoffs; every K must be positive.
    pub ks: Vec<usize>,
    /// Pool variants: `unbalanced` (the split as-is) and/or `balanced`
    /// (gender-balanced resample per seed).
    pub variants: Vec<PoolVariant>,
    /// Models to evaluate: `random`, `tfidf`, or a `[models.*]` tag.
    pub models: Vec<String>,
    /// Also write per-query rankings as JSONL (one file per model/variant/seed).
    pub write_runs: bool,
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection {
            split: Split::Val,
            ks: vec![5, 10, 25],
            variants: vec![PoolVariant::Unbalanced],
            models: vec!["random".into()],
            write_runs: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PoolVariant {
    Unbalanced,
    Balanced,
}

impl PoolVariant {
    pub fn as_str(self) -> &'static str {
        match self {
            PoolVariant::Unbalanced => "unbalanced",
            PoolVariant::Balanced => "balanced",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelPaths {
    pub caption_manifest: PathBuf,
    pub caption_blob: PathBuf,
    pub image_manifest: PathBuf,
    pub image_blob: PathBuf,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FilterSection {
    /// Named starting point (`clip-default`, `dino-ablation`); explicit
    /// fields below override it. No preset and no fields = `clip-default`.
    pub preset: Option<String>,
    pub k_neighbors: Option<usize>,
    pub tau_real: Option<f64>,
    pub tau_gender: Option<f64>,
    pub metric: Option<genbias_core::embed::Metric>,
    /// Person-crop embeddings the KNN filter runs over.
    pub embedding_manifest: Option<PathBuf>,
    pub embedding_blob: Option<PathBuf>,
    /// Decisions CSV for `build-contrast-set`; defaults to the file `filter`
    /// writes (`<out_dir>/filter_decisions.csv`).
    pub decisions: Option<PathBuf>,
}

impl FilterSection {
    /// The effective filter configuration: preset (default `clip-default`)
    /// with any explicit field overrides applied.
    pub fn resolve(&self) -> Result<FilterConfig> {
        let mut config = match &self.preset {
            Some(name) => FilterConfig::preset(name)?,
            None => FilterConfig::clip_default(),
        };
        if let Some(k) = self.k_neighbors {
            config.k_neighbors = k;
        }
        if let Some(tau) = self.tau_real {
            config.tau_real = tau;
        }
        if let Some(tau) = self.tau_gender {
            config.tau_gender = tau;
        }
        if let Some(metric) = self.metric {
            config.metric = metric;
        }
        config.validate()?;
        Ok(config)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifySection {
    /// Contrast-set CSV; defaults to the file `filter` writes
    /// (`<out_dir>/contrast_set.csv`).
    pub contrast_set: Option<PathBuf>,
    pub image_manifest: Option<PathBuf>,
    pub image_blob: Option<PathBuf>,
    /// Gender prompt vectors under the ids `male` and `female`.
    pub prompt_manifest: Option<PathBuf>,
    pub prompt_blob: Option<PathBuf>,
    /// Query vectors keyed by image id (or `<image_id>#0` caption id).
    pub query_manifest: Option<PathBuf>,
    pub query_blob: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClusterSection {
    pub split: Split,
    pub m: usize,
    pub seed: u64,
    pub max_iters: usize,
    /// How many salient terms to attach per cluster.
    pub n_terms: usize,
    /// Caption embeddings, keyed by image id or `<image_id>#<k>`.
    pub caption_manifest: Option<PathBuf>,
    pub caption_blob: Option<PathBuf>,
}

impl Default for ClusterSection {
    fn default() -> Self {
        ClusterSection {
            split: Split::Val,
            m: 20,
            seed: 0,
            max_iters: 300,
            n_terms: 8,
            caption_manifest: None,
            caption_blob: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProbeSection {
    pub epochs: usize,
    pub learning_rate: f64,
    pub l2: f64,
}

impl Default for ProbeSection {
    fn default() -> Self {
        let hyper = ProbeHyper::default();
        ProbeSection {
            epochs: hyper.epochs,
            learning_rate: hyper.learning_rate,
            l2: hyper.l2,
        }
    }
}

impl ProbeSection {
    pub fn hyper(&self) -> ProbeHyper {
        ProbeHyper {
            epochs: self.epochs,
            learning_rate: self.learning_rate,
            l2: self.l2,
        }
    }
}

impl RunConfig {
    /// Loads and resolves a config file. Relative paths inside the file are
    /// resolved against the file's directory, so a config travels with its
    /// data; flag paths resolve against the working directory as usual.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        let mut config: RunConfig = toml::from_str(&text)
            .with_context(|| format!("malformed config {}", path.display()))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        if config.paths.out_dir.as_os_str().is_empty() {
            config.paths.out_dir = PathBuf::from("out");
        }
        config.resolve_paths(base);
        config.validate()?;
        Ok(config)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let anchor = |path: &mut PathBuf| {
            if path.is_relative() {
                *path = base.join(&path);
            }
        };
        let anchor_opt = |path: &mut Option<PathBuf>| {
            if let Some(p) = path {
                if p.is_relative() {
                    *p = base.join(&p);
                }
            }
        };
        anchor(&mut self.paths.out_dir);
        for path in [
            &mut self.paths.lexicon,
            &mut self.paths.corpus,
            &mut self.paths.captions_train,
            &mut self.paths.instances_train,
            &mut self.paths.captions_val,
            &mut self.paths.instances_val,
            &mut self.filter.embedding_manifest,
            &mut self.filter.embedding_blob,
            &mut self.filter.decisions,
            &mut self.verify.contrast_set,
            &mut self.verify.image_manifest,
            &mut self.verify.image_blob,
            &mut self.verify.prompt_manifest,
            &mut self.verify.prompt_blob,
            &mut self.verify.query_manifest,
            &mut self.verify.query_blob,
            &mut self.cluster.caption_manifest,
            &mut self.cluster.caption_blob,
        ] {
            anchor_opt(path);
        }
        for model in self.models.values_mut() {
            anchor(&mut model.caption_manifest);
            anchor(&mut model.caption_blob);
            anchor(&mut model.image_manifest);
            anchor(&mut model.image_blob);
        }
    }

    /// Structural checks that hold for every command.
    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            bail!("config needs at least one seed");
        }
        if self.eval.ks.is_empty() || self.eval.ks.contains(&0) {
            bail!("eval.ks must be a non-empty list of positive cutoffs");
        }
        if self.eval.models.is_empty() {
            bail!("eval.models must name at least one model");
        }
        if self.eval.variants.is_empty() {
            bail!("eval.variants must name at least one pool variant");
        }
        for tag in &self.eval.models {
            if tag != "random" && tag != "tfidf" && !self.models.contains_key(tag) {
                bail!("eval model {tag:?} has no [models.{tag}] section (and is not random/tfidf)");
            }
        }
        if self.dataset_tag.is_empty() || self.dataset_tag.contains(',') {
            bail!("dataset_tag must be non-empty and comma-free");
        }
        self.filter.resolve().context("invalid [filter] section")?;
        Ok(())
    }

    /// Applies global flag overrides (flags win over file values).
    pub fn apply_overrides(
        &mut self,
        out: Option<PathBuf>,
        seed_list: Option<Vec<u64>>,
    ) -> Result<()> {
        if let Some(dir) = out {
            self.paths.out_dir = dir;
        }
        if let Some(seeds) = seed_list {
            if seeds.is_empty() {
                bail!("--seed-list needs at least one seed");
            }
            self.seeds = seeds;
        }
        Ok(())
    }

    pub fn out_dir(&self) -> &Path {
        &self.paths.out_dir
    }

    pub fn corpus_path(&self) -> PathBuf {
        self.paths
            .corpus
            .clone()
            .unwrap_or_else(|| self.paths.out_dir.join("corpus.tsv"))
    }

    pub fn decisions_path(&self) -> PathBuf {
        self.filter
            .decisions
            .clone()
            .unwrap_or_else(|| self.paths.out_dir.join("filter_decisions.csv"))
    }

    pub fn contrast_set_path(&self) -> PathBuf {
        self.verify
            .contrast_set
            .clone()
            .unwrap_or_else(|| self.paths.out_dir.join("contrast_set.csv"))
    }

    pub fn lexicon(&self) -> Result<genbias_core::corpus::GenderLexicon> {
        match &self.paths.lexicon {
            Some(path) => genbias_core::corpus::GenderLexicon::load(path)
                .with_context(|| format!("cannot load lexicon {}", path.display())),
            None => Ok(genbias_core::corpus::GenderLexicon::builtin()),
        }
    }

    /// The fully resolved config as TOML, for the provenance echo.
    pub fn echo(&self) -> String {
        toml::to_string_pretty(self).expect("config serialization cannot fail")
    }
}

/// Bails unless `path` exists; `what` names the role in the message.
pub fn require_file(path: &Path, what: &str) -> Result<()> {
    if !path.is_file() {
        bail!("{what} not found at {}", path.display());
    }
    Ok(())
}

/// Unwraps an optional config path, naming the missing key on failure.
pub fn required_path(path: &Option<PathBuf>, key: &str) -> Result<PathBuf> {
    path.clone()
        .ok_or_else(|| anyhow::anyhow!("config is missing the {key} path"))
}
