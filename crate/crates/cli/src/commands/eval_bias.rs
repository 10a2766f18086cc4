//! `eval-bias` — run retrieval models over evaluation pools and report
//! Bias@K / MaxSkew@K, seed-aggregated.
//!
//! Protocol: queries are the neutralized first captions of every
//! gender-labeled image in the pool. Bias@K is measured over the full pool
//! (undefined-labeled images included — they dilute the top-K), MaxSkew@K
//! over the pool pre-filtered to labeled images, with the desired
//! distribution taken from that labeled pool. A query never retrieves its own
//! source image. Deterministic models on a fixed pool run once; the random
//! model, and every model on per-seed balanced pools, run once per seed.

use std::collections::{BTreeMap, HashMap};

use anyhow::{bail, ensure, Context, Result};
use rayon::prelude::*;

use genbias_core::corpus::text::neutralize_caption;
use genbias_core::corpus::{Corpus, GenderLabel};
use genbias_core::embed::EmbeddingStore;
use genbias_core::metrics::{
    aggregate_over_seeds, bias_at_k, desired_from_dataset, mean_max_skew_at_k,
    write_bias_report_csv, write_bias_report_json, BiasReport, MetricKind, MetricValue,
};
use genbias_core::retrieval::{build_tfidf_index, tfidf_retrieve, TfidfIndex};
use genbias_core::retrieval::{embedding_retrieve, random_retrieve, with_rank_scores, Query, RetrievalRun};
use genbias_core::rng::derive_seed;

use crate::config::{PoolVariant, RunConfig};
use crate::outputs::Outputs;

enum Model {
    Random,
    Tfidf,
    Embedding {
        caption: Box<EmbeddingStore>,
        image: Box<EmbeddingStore>,
    },
}

impl Model {
    fn load(tag: &str, config: &RunConfig) -> Result<Self> {
        match tag {
            "random" => Ok(Model::Random),
            "tfidf" => Ok(Model::Tfidf),
            _ => {
                let paths = &config.models[tag];
                Ok(Model::Embedding {
                    caption: Box::new(super::load_store(
                        &paths.caption_manifest,
                        &paths.caption_blob,
                        &format!("{tag} caption"),
                    )?),
                    image: Box::new(super::load_store(
                        &paths.image_manifest,
                        &paths.image_blob,
                        &format!("{tag} image"),
                    )?),
                })
            }
        }
    }

    /// Whether results vary with the seed on a fixed pool.
    fn is_stochastic(&self) -> bool {
        matches!(self, Model::Random)
    }
}

struct QuerySpec {
    image_id: String,
    gender: GenderLabel,
    /// Neutralized first caption — the retrieval query text.
    caption: String,
}

/// One variant pool for one seed: the full pool, its labeled subset, and the
/// query set drawn from the labeled records. Only real records participate:
/// synthetic edits appended to the corpus for filtering never enter the
/// evaluation pool, so a corpus carrying edits evaluates exactly like the
/// corpus before they were added.
struct Pool {
    full: Corpus,
    labeled: Corpus,
    labels: HashMap<String, GenderLabel>,
    queries: Vec<QuerySpec>,
}

impl Pool {
    fn build(split_corpus: &Corpus, variant: PoolVariant, seed: u64) -> Result<Pool> {
        let real = Corpus::new(
            split_corpus
                .records()
                .iter()
                .filter(|r| r.origin.is_real())
                .cloned()
                .collect(),
            split_corpus.lexicon().clone(),
        )?;
        let full = match variant {
            PoolVariant::Unbalanced => real,
            // Stream 0 of the run seed feeds the balancing draw; per-query
            // ranking seeds use streams ≥ 1.
            PoolVariant::Balanced => real.balance_by_gender(derive_seed(seed, 0))?,
        };
        let labeled = Corpus::new(
            full.records()
                .iter()
                .filter(|r| r.gender_label != GenderLabel::Undefined)
                .cloned()
                .collect(),
            full.lexicon().clone(),
        )?;
        let labels = full
            .records()
            .iter()
            .map(|r| (r.id.clone(), r.gender_label))
            .collect();
        let queries = labeled
            .records()
            .iter()
            .map(|record| QuerySpec {
                image_id: record.id.clone(),
                gender: record.gender_label,
                caption: neutralize_caption(&record.captions[0], labeled.lexicon()),
            })
            .collect();
        Ok(Pool {
            full,
            labeled,
            labels,
            queries,
        })
    }
}

/// Ranks one pool for one query, excluding the query's source image, and
/// truncated to `max_k` results.
fn rank_pool(
    model: &Model,
    index: Option<&TfidfIndex>,
    pool_ids: &[String],
    query: &QuerySpec,
    max_k: usize,
    query_seed: u64,
) -> Result<Vec<(String, f64)>> {
    match model {
        Model::Random => {
            // Drawing max_k + 1 and deleting the source keeps the result a
            // uniform ordered sample of the pool minus the source.
            let mut ids = random_retrieve(pool_ids, max_k + 1, query_seed)?;
            ids.retain(|id| *id != query.image_id);
            ids.truncate(max_k);
            Ok(with_rank_scores(ids))
        }
        Model::Tfidf => {
            let index = index.expect("tfidf index built per pool");
            Ok(tfidf_retrieve(index, &query.caption, max_k, Some(&query.image_id))?)
        }
        Model::Embedding { caption, image } => {
            let query_id = super::query_id_in(caption, &query.image_id)?;
            let mut ranked = embedding_retrieve(caption, image, &query_id, pool_ids, max_k + 1)?;
            ranked.retain(|(id, _)| *id != query.image_id);
            ranked.truncate(max_k);
            Ok(ranked)
        }
    }
}

#[derive(Debug)]
struct SeedOutcome {
    values: BTreeMap<(MetricKind, usize), f64>,
    /// Per-query rankings over the full pool, for the optional run export.
    bias_rankings: Vec<Vec<(String, f64)>>,
}

fn evaluate_seed(
    model: &Model,
    pool: &Pool,
    ks: &[usize],
    run_seed: u64,
) -> Result<SeedOutcome> {
    let max_k = *ks.iter().max().expect("ks validated non-empty");
    let bias_ids: Vec<String> = pool.full.ids().map(str::to_string).collect();
    let skew_ids: Vec<String> = pool.labeled.ids().map(str::to_string).collect();
    ensure!(
        bias_ids.len() > max_k,
        "pool of {} images cannot rank {} besides the query",
        bias_ids.len(),
        max_k
    );
    ensure!(
        skew_ids.len() > max_k,
        "labeled pool of {} images cannot rank {} besides the query",
        skew_ids.len(),
        max_k
    );
    ensure!(!pool.queries.is_empty(), "pool has no gender-labeled queries");

    // Each TF-IDF pool gets its own index so the document space matches the
    // candidate space exactly.
    let (bias_index, skew_index) = match model {
        Model::Tfidf => (
            Some(build_tfidf_index(&pool.full.neutralized())?),
            Some(build_tfidf_index(&pool.labeled.neutralized())?),
        ),
        _ => (None, None),
    };

    let rank_all = |ids: &[String], index: Option<&TfidfIndex>, stream_offset: u64| {
        pool.queries
            .par_iter()
            .enumerate()
            .map(|(i, query)| {
                let query_seed = derive_seed(run_seed, 2 * i as u64 + stream_offset);
                rank_pool(model, index, ids, query, max_k, query_seed)
            })
            .collect::<Result<Vec<_>>>()
    };
    let bias_rankings = rank_all(&bias_ids, bias_index.as_ref(), 1)?;
    let skew_rankings = rank_all(&skew_ids, skew_index.as_ref(), 2)?;

    let desired = desired_from_dataset(&pool.labels, &skew_ids)?;
    let mut values = BTreeMap::new();
    for &k in ks {
        values.insert(
            (MetricKind::Bias, k),
            bias_at_k(&bias_rankings, &pool.labels, k)?,
        );
        let (mean_skew, _contributing) =
            mean_max_skew_at_k(&skew_rankings, &pool.labels, &desired, k)?;
        values.insert((MetricKind::MaxSkew, k), mean_skew);
    }
    Ok(SeedOutcome {
        values,
        bias_rankings,
    })
}

pub fn run(config: &RunConfig) -> Result<()> {
    let corpus = super::load_corpus(config)?;
    let split_corpus = corpus.select_split(config.eval.split);
    if split_corpus.is_empty() {
        bail!("corpus has no {} records", config.eval.split);
    }

    let mut outputs = Outputs::new();
    let mut reports = Vec::new();
    for &variant in &config.eval.variants {
        for tag in &config.eval.models {
            let model = Model::load(tag, config)
                .with_context(|| format!("cannot set up model {tag:?}"))?;
            let seeds: &[u64] =
                if model.is_stochastic() || variant == PoolVariant::Balanced {
                    &config.seeds
                } else {
                    &config.seeds[..1]
                };

            let mut per_metric: BTreeMap<(MetricKind, usize), Vec<f64>> = BTreeMap::new();
            let mut query_count = None;
            for &seed in seeds {
                let pool = Pool::build(&split_corpus, variant, seed)?;
                let outcome = evaluate_seed(&model, &pool, &config.eval.ks, seed)
                    .with_context(|| format!("evaluating {tag} on the {} pool", variant.as_str()))?;
                match query_count {
                    None => query_count = Some(pool.queries.len()),
                    Some(n) => ensure!(
                        n == pool.queries.len(),
                        "query count changed across seeds ({n} vs {})",
                        pool.queries.len()
                    ),
                }
                for (key, value) in outcome.values {
                    per_metric.entry(key).or_default().push(value);
                }
                if config.eval.write_runs {
                    let queries = pool
                        .queries
                        .iter()
                        .map(|q| Query {
                            query_id: format!("{}#0", q.image_id),
                            source_image_id: q.image_id.clone(),
                            gender: q.gender,
                        })
                        .collect();
                    let run = RetrievalRun::new(tag.clone(), queries, outcome.bias_rankings)?;
                    let staged = outputs.stage(config.out_dir().join(format!(
                        "runs/{tag}-{}-seed{seed}.jsonl",
                        variant.as_str()
                    )))?;
                    run.write_jsonl(&staged)?;
                }
            }

            let dataset_tag = match variant {
                PoolVariant::Unbalanced => config.dataset_tag.clone(),
                PoolVariant::Balanced => format!("{}-balanced", config.dataset_tag),
            };
            let mut report = BiasReport::new(tag.clone(), dataset_tag, query_count.unwrap_or(0));
            for (&(metric, k), values) in &per_metric {
                let (mean, std) = aggregate_over_seeds(values)?;
                report.insert(
                    metric,
                    k,
                    MetricValue {
                        mean,
                        std,
                        n_seeds: seeds.len(),
                    },
                )?;
            }
            reports.push(report);
        }
    }

    let csv_path = config.out_dir().join("bias_report.csv");
    let json_path = config.out_dir().join("bias_report.json");
    write_bias_report_csv(&reports, &outputs.stage(csv_path.clone())?)?;
    write_bias_report_json(&reports, &outputs.stage(json_path)?)?;
    super::stage_echo(&mut outputs, config, "eval-bias")?;
    outputs.commit()?;

    println!(
        "{:<12} {:<20} {:<9} {:>4} {:>10} {:>10} {:>7} {:>9}",
        "model", "dataset", "metric", "K", "mean", "std", "seeds", "queries"
    );
    for report in &reports {
        for row in report.rows() {
            println!(
                "{:<12} {:<20} {:<9} {:>4} {:>10.4} {:>10.4} {:>7} {:>9}",
                row.model, row.dataset, row.metric, row.k, row.mean, row.std, row.n_seeds,
                row.n_queries
            );
        }
    }
    println!("wrote {}", csv_path.display());
    Ok(())
}
