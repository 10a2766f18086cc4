//! Fairness metrics over ranked retrieval results.
//!
//! Three metrics, all computed over the top-K of a ranking and a label map
//! `id → {male, female, undefined}`:
//!
//! * **Bias@K** — mean over queries of δ_K = (N_male − N_female) /
//!   (N_male + N_female), with δ_K = 0 when the top-K holds no labeled image.
//!   Positive values mean male over-representation.
//! * **Skew@K** — ln(p_actual / p_desired) for one attribute, where p_actual
//!   is the attribute's share among the *labeled* top-K and p_desired comes
//!   from an [`AttributeDistribution`]. An attribute absent from the labeled
//!   top-K yields −∞; that sentinel never escapes MaxSkew.
//! * **MaxSkew@K** — max over the two attributes of Skew@K. Queries whose
//!   top-K holds no labeled image are skipped at aggregation (with the
//!   intended protocol — pools pre-filtered to labeled images — this cannot
//!   happen).
//!
//! All functions consume `(id, score)` rankings but read only the order;
//! scores never influence a metric value.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{Gender, GenderLabel};
use crate::{Error, Result};

/// Desired attribute proportions for Skew-style metrics. Proportions are in
/// [0, 1] and sum to 1 over {male, female}.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttributeDistribution {
    male: f64,
    female: f64,
}

impl AttributeDistribution {
    const SUM_TOLERANCE: f64 = 1e-9;

    pub fn new(male: f64, female: f64) -> Result<Self> {
        let in_range = |p: f64| (0.0..=1.0).contains(&p);
        if !in_range(male) || !in_range(female) || (male + female - 1.0).abs() > Self::SUM_TOLERANCE
        {
            return Err(Error::InvalidArgument(format!(
                "attribute proportions must lie in [0, 1] and sum to 1; got male {male}, female {female}"
            )));
        }
        Ok(AttributeDistribution { male, female })
    }

    /// The exact 50/50 distribution.
    pub fn balanced() -> Self {
        AttributeDistribution {
            male: 0.5,
            female: 0.5,
        }
    }

    pub fn proportion(&self, attribute: Gender) -> f64 {
        match attribute {
            Gender::Male => self.male,
            Gender::Female => self.female,
        }
    }

    /// The distribution with male and female proportions exchanged.
    pub fn swapped(&self) -> Self {
        AttributeDistribution {
            male: self.female,
            female: self.male,
        }
    }
}

fn label_of(labels: &HashMap<String, GenderLabel>, id: &str) -> GenderLabel {
    labels.get(id).copied().unwrap_or(GenderLabel::Undefined)
}

fn check_length(ranking: &[(String, f64)], k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be positive".into()));
    }
    if ranking.len() < k {
        return Err(Error::InvalidArgument(format!(
            "ranking holds {} results but k = {k}",
            ranking.len()
        )));
    }
    Ok(())
}

/// Counts (male, female) among the top-k of a ranking. Ids missing from the
/// label map count as undefined.
fn top_k_counts(
    ranking: &[(String, f64)],
    labels: &HashMap<String, GenderLabel>,
    k: usize,
) -> (usize, usize) {
    let mut male = 0;
    let mut female = 0;
    for (id, _) in &ranking[..k] {
        match label_of(labels, id) {
            GenderLabel::Male => male += 1,
            GenderLabel::Female => female += 1,
            GenderLabel::Undefined => {}
        }
    }
    (male, female)
}

/// Per-query gender imbalance δ_K among the top-k: (N_male − N_female) /
/// (N_male + N_female), or 0 when the top-k holds no labeled image.
pub fn delta_k(
    ranking: &[(String, f64)],
    labels: &HashMap<String, GenderLabel>,
    k: usize,
) -> Result<f64> {
    check_length(ranking, k)?;
    let (male, female) = top_k_counts(ranking, labels, k);
    if male + female == 0 {
        return Ok(0.0);
    }
    Ok((male as f64 - female as f64) / (male as f64 + female as f64))
}

/// Bias@K: mean of δ_K over all query rankings. Errors on an empty query set.
pub fn bias_at_k(
    rankings: &[Vec<(String, f64)>],
    labels: &HashMap<String, GenderLabel>,
    k: usize,
) -> Result<f64> {
    if rankings.is_empty() {
        return Err(Error::InvalidArgument(
            "Bias@K over an empty query set is undefined".into(),
        ));
    }
    let mut sum = 0.0;
    for ranking in rankings {
        sum += delta_k(ranking, labels, k)?;
    }
    Ok(sum / rankings.len() as f64)
}

/// Skew@K for one attribute: ln(p_actual / p_desired) with p_actual the
/// attribute's share among the labeled top-k.
///
/// Errors when the desired proportion is zero (the metric is undefined) or
/// when the top-k holds no labeled image (callers skip such queries — see
/// [`mean_max_skew_at_k`]). Returns −∞ when the attribute itself is absent
/// from a non-empty labeled top-k; that sentinel is an intermediate value for
/// [`max_skew_at_k`], not a reportable result.
pub fn skew_at_k(
    ranking: &[(String, f64)],
    labels: &HashMap<String, GenderLabel>,
    attribute: Gender,
    desired: &AttributeDistribution,
    k: usize,
) -> Result<f64> {
    check_length(ranking, k)?;
    let p_desired = desired.proportion(attribute);
    if p_desired == 0.0 {
        return Err(Error::InvalidArgument(format!(
            "desired proportion for {attribute} is zero; Skew@K is undefined"
        )));
    }
    let (male, female) = top_k_counts(ranking, labels, k);
    let labeled = male + female;
    if labeled == 0 {
        return Err(Error::InvalidArgument(
            "top-k holds no labeled image; Skew@K is undefined for this query".into(),
        ));
    }
    let hits = match attribute {
        Gender::Male => male,
        Gender::Female => female,
    };
    if hits == 0 {
        return Ok(f64::NEG_INFINITY);
    }
    let p_actual = hits as f64 / labeled as f64;
    Ok((p_actual / p_desired).ln())
}

/// MaxSkew@K: the larger of the two per-attribute skews, or `None` when the
/// top-k holds no labeled image (the query is skipped at aggregation).
/// Always ≥ 0 for exhaustive attributes with strictly positive desired
/// proportions.
pub fn max_skew_at_k(
    ranking: &[(String, f64)],
    labels: &HashMap<String, GenderLabel>,
    desired: &AttributeDistribution,
    k: usize,
) -> Result<Option<f64>> {
    check_length(ranking, k)?;
    for attribute in [Gender::Male, Gender::Female] {
        if desired.proportion(attribute) == 0.0 {
            return Err(Error::InvalidArgument(format!(
                "desired proportion for {attribute} is zero; MaxSkew@K is undefined"
            )));
        }
    }
    let (male, female) = top_k_counts(ranking, labels, k);
    if male + female == 0 {
        return Ok(None);
    }
    let male_skew = skew_at_k(ranking, labels, Gender::Male, desired, k)?;
    let female_skew = skew_at_k(ranking, labels, Gender::Female, desired, k)?;
    Ok(Some(male_skew.max(female_skew)))
}

/// Mean MaxSkew@K over all queries that contribute (whose labeled top-k is
/// non-empty). Returns the mean and the number of contributing queries;
/// errors if every query is skipped.
pub fn mean_max_skew_at_k(
    rankings: &[Vec<(String, f64)>],
    labels: &HashMap<String, GenderLabel>,
    desired: &AttributeDistribution,
    k: usize,
) -> Result<(f64, usize)> {
    let mut sum = 0.0;
    let mut contributing = 0usize;
    for ranking in rankings {
        if let Some(value) = max_skew_at_k(ranking, labels, desired, k)? {
            sum += value;
            contributing += 1;
        }
    }
    if contributing == 0 {
        return Err(Error::InvalidArgument(
            "MaxSkew@K aggregate is undefined: every query's labeled top-k is empty".into(),
        ));
    }
    Ok((sum / contributing as f64, contributing))
}

/// Derives the desired distribution from the labeled members of an evaluation
/// pool. Undefined or unknown ids are ignored; errors if either gender is
/// absent.
pub fn desired_from_dataset(
    labels: &HashMap<String, GenderLabel>,
    pool: &[String],
) -> Result<AttributeDistribution> {
    let mut male = 0usize;
    let mut female = 0usize;
    for id in pool {
        match label_of(labels, id) {
            GenderLabel::Male => male += 1,
            GenderLabel::Female => female += 1,
            GenderLabel::Undefined => {}
        }
    }
    if male == 0 || female == 0 {
        let missing = if male == 0 { "male" } else { "female" };
        return Err(Error::InvalidArgument(format!(
            "cannot derive desired proportions: pool has no {missing}-labeled image"
        )));
    }
    let total = (male + female) as f64;
    AttributeDistribution::new(male as f64 / total, female as f64 / total)
}

/// Mean and population standard deviation (n denominator) of per-seed values.
pub fn aggregate_over_seeds(values: &[f64]) -> Result<(f64, f64)> {
    if values.is_empty() {
        return Err(Error::InvalidArgument(
            "cannot aggregate an empty list of seed values".into(),
        ));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let variance = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    Ok((mean, variance.sqrt()))
}

/// Which bias metric a report row describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MetricKind {
    Bias,
    MaxSkew,
}

impl MetricKind {
    pub fn as_str(self) -> &'static str {
        match self {
            MetricKind::Bias => "bias",
            MetricKind::MaxSkew => "max_skew",
        }
    }
}

impl std::fmt::Display for MetricKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for MetricKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bias" => Ok(MetricKind::Bias),
            "max_skew" => Ok(MetricKind::MaxSkew),
            other => Err(Error::InvalidArgument(format!("unknown metric {other:?}"))),
        }
    }
}

/// Seed-aggregated value of one (metric, K) cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricValue {
    pub mean: f64,
    pub std: f64,
    pub n_seeds: usize,
}

/// Seed-aggregated bias metrics for one (model, dataset) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct BiasReport {
    pub model_tag: String,
    pub dataset_tag: String,
    pub query_count: usize,
    values: BTreeMap<(MetricKind, usize), MetricValue>,
}

impl BiasReport {
    pub fn new(
        model_tag: impl Into<String>,
        dataset_tag: impl Into<String>,
        query_count: usize,
    ) -> Self {
        BiasReport {
            model_tag: model_tag.into(),
            dataset_tag: dataset_tag.into(),
            query_count,
            values: BTreeMap::new(),
        }
    }

    /// Records one (metric, K) cell, validating report invariants: a single
    /// seed has zero std, Bias means lie in [−1, 1], MaxSkew means are ≥ 0
    /// (up to float slack).
    pub fn insert(&mut self, metric: MetricKind, k: usize, value: MetricValue) -> Result<()> {
        const SLACK: f64 = 1e-9;
        if value.n_seeds == 0 {
            return Err(Error::InvalidArgument("n_seeds must be ≥ 1".into()));
        }
        if value.n_seeds == 1 && value.std != 0.0 {
            return Err(Error::InvalidArgument(format!(
                "std must be 0 for a single seed, got {}",
                value.std
            )));
        }
        match metric {
            MetricKind::Bias => {
                if value.mean < -1.0 - SLACK || value.mean > 1.0 + SLACK {
                    return Err(Error::InvalidArgument(format!(
                        "Bias@{k} mean {} outside [-1, 1]",
                        value.mean
                    )));
                }
            }
            MetricKind::MaxSkew => {
                if value.mean < -SLACK {
                    return Err(Error::InvalidArgument(format!(
                        "MaxSkew@{k} mean {} is negative",
                        value.mean
                    )));
                }
            }
        }
        self.values.insert((metric, k), value);
        Ok(())
    }

    pub fn get(&self, metric: MetricKind, k: usize) -> Option<&MetricValue> {
        self.values.get(&(metric, k))
    }

    /// Flat rows in (metric, K) order, ready for CSV/JSON export.
    pub fn rows(&self) -> Vec<BiasReportRow> {
        self.values
            .iter()
            .map(|(&(metric, k), value)| BiasReportRow {
                model: self.model_tag.clone(),
                dataset: self.dataset_tag.clone(),
                metric: metric.as_str().to_string(),
                k,
                mean: value.mean,
                std: value.std,
                n_seeds: value.n_seeds,
                n_queries: self.query_count,
            })
            .collect()
    }
}

/// One exported report row; identical fields in CSV and JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasReportRow {
    pub model: String,
    pub dataset: String,
    pub metric: String,
    #[serde(rename = "K")]
    pub k: usize,
    pub mean: f64,
    pub std: f64,
    pub n_seeds: usize,
    pub n_queries: usize,
}

/// Writes report rows as CSV. Floats use Rust's shortest round-trip form, so
/// the CSV carries exactly the same values as the JSON mirror.
pub fn write_bias_report_csv(reports: &[BiasReport], path: &Path) -> Result<()> {
    let mut out = String::from("model,dataset,metric,K,mean,std,n_seeds,n_queries\n");
    for report in reports {
        for row in report.rows() {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                row.model, row.dataset, row.metric, row.k, row.mean, row.std, row.n_seeds,
                row.n_queries
            ));
        }
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Writes the JSON mirror of [`write_bias_report_csv`]: an array of row
/// objects with identical fields.
pub fn write_bias_report_json(reports: &[BiasReport], path: &Path) -> Result<()> {
    let rows: Vec<BiasReportRow> = reports.iter().flat_map(|r| r.rows()).collect();
    let text = serde_json::to_string_pretty(&rows).expect("report serialization cannot fail");
    fs::write(path, text).map_err(|e| Error::io(path, e))
}
