//! Text-only gender probe over neutralized captions.
//!
//! The probe is a logistic-loss linear model on binary bag-of-words features,
//! trained by full-batch gradient descent with an L2 penalty. Its entire
//! purpose is the premise check: captions are required to contain no gendered
//! lexicon word, so any above-chance AUC comes from contextual words alone.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use crate::corpus::text::lowercase_tokens;
use crate::corpus::{Gender, GenderLexicon};
use crate::{Error, Result};

/// Training hyperparameters. Defaults: 300 epochs, learning rate 0.5,
/// L2 penalty 1e-4.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeHyper {
    pub epochs: usize,
    pub learning_rate: f64,
    pub l2: f64,
}

impl Default for ProbeHyper {
    fn default() -> Self {
        ProbeHyper {
            epochs: 300,
            learning_rate: 0.5,
            l2: 1e-4,
        }
    }
}

/// A trained probe: one weight per vocabulary word plus a bias. Scores are
/// P(male); the vocabulary is guaranteed free of gendered lexicon words.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeModel {
    vocabulary: BTreeMap<String, usize>,
    weights: Vec<f64>,
    bias: f64,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// ln(1 + e^x) without overflow.
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

impl ProbeModel {
    pub fn vocabulary_len(&self) -> usize {
        self.vocabulary.len()
    }

    pub fn vocabulary(&self) -> impl Iterator<Item = &str> {
        self.vocabulary.keys().map(String::as_str)
    }

    pub fn weight(&self, word: &str) -> Option<f64> {
        self.vocabulary.get(word).map(|&index| self.weights[index])
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    /// Distinct in-vocabulary word indices of a caption, ascending.
    fn features(&self, caption: &str) -> Vec<usize> {
        let words: BTreeSet<String> = lowercase_tokens(caption).collect();
        words
            .iter()
            .filter_map(|word| self.vocabulary.get(word).copied())
            .collect()
    }

    /// P(male) for a caption; out-of-vocabulary words are ignored.
    pub fn score(&self, caption: &str) -> f64 {
        let z = self.bias
            + self
                .features(caption)
                .iter()
                .map(|&index| self.weights[index])
                .sum::<f64>();
        sigmoid(z)
    }

    pub fn predict(&self, caption: &str) -> Gender {
        if self.score(caption) >= 0.5 {
            Gender::Male
        } else {
            Gender::Female
        }
    }

    /// Writes the model as a two-column tab-separated file: a `#bias` line
    /// first, then one `word\tweight` line per vocabulary word.
    pub fn write_tsv(&self, path: &Path) -> Result<()> {
        let mut out = format!("#bias\t{}\n", self.bias);
        for (word, &index) in &self.vocabulary {
            out.push_str(&format!("{word}\t{}\n", self.weights[index]));
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    /// Reads a model written by [`write_tsv`](Self::write_tsv).
    pub fn read_tsv(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut bias = None;
        let mut vocabulary = BTreeMap::new();
        let mut weights = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            if line.is_empty() {
                continue;
            }
            let context = |detail: String| {
                Error::malformed("probe tsv", path, format!("line {}: {detail}", lineno + 1))
            };
            let (word, value) = line
                .split_once('\t')
                .ok_or_else(|| context("expected two tab-separated columns".into()))?;
            let value: f64 = value
                .parse()
                .map_err(|_| context(format!("weight {value:?} is not a number")))?;
            if word == "#bias" {
                if bias.replace(value).is_some() {
                    return Err(context("duplicate #bias line".into()));
                }
            } else {
                if vocabulary.insert(word.to_string(), weights.len()).is_some() {
                    return Err(context(format!("duplicate word {word:?}")));
                }
                weights.push(value);
            }
        }
        let bias = bias.ok_or_else(|| Error::malformed("probe tsv", path, "missing #bias line"))?;
        Ok(ProbeModel {
            vocabulary,
            weights,
            bias,
        })
    }
}

/// Trains the probe. Returns the model together with the objective value
/// (mean logistic loss plus L2 penalty) at initialization and after each
/// epoch — `epochs + 1` entries.
///
/// Examples are sorted internally, so the accumulated gradient — hence the
/// trained model — is identical under any input order. Errors if a caption
/// contains a gendered lexicon word (the probe must only ever see neutralized
/// text) or if either class is unrepresented.
pub fn train_probe(
    examples: &[(String, Gender)],
    lexicon: &GenderLexicon,
    hyper: &ProbeHyper,
) -> Result<(ProbeModel, Vec<f64>)> {
    if hyper.epochs == 0 || hyper.learning_rate <= 0.0 || hyper.l2 < 0.0 {
        return Err(Error::InvalidArgument(
            "probe hyperparameters must have positive epochs and learning rate and a non-negative l2".into(),
        ));
    }
    for (caption, _) in examples {
        for token in lowercase_tokens(caption) {
            if lexicon.classify(&token).is_some() {
                return Err(Error::InvalidArgument(format!(
                    "caption {caption:?} contains gendered word {token:?}; the probe only accepts neutralized text"
                )));
            }
        }
    }
    let mut examples: Vec<&(String, Gender)> = examples.iter().collect();
    examples.sort();
    let males = examples.iter().filter(|(_, g)| *g == Gender::Male).count();
    if males == 0 || males == examples.len() {
        return Err(Error::InvalidArgument(
            "probe training needs at least one example of each gender".into(),
        ));
    }

    let words: BTreeSet<String> = examples
        .iter()
        .flat_map(|(caption, _)| lowercase_tokens(caption))
        .collect();
    let vocabulary: BTreeMap<String, usize> = words
        .into_iter()
        .enumerate()
        .map(|(index, word)| (word, index))
        .collect();

    let mut model = ProbeModel {
        weights: vec![0.0; vocabulary.len()],
        bias: 0.0,
        vocabulary,
    };
    let features: Vec<Vec<usize>> = examples
        .iter()
        .map(|(caption, _)| model.features(caption))
        .collect();
    let targets: Vec<f64> = examples
        .iter()
        .map(|(_, gender)| if *gender == Gender::Male { 1.0 } else { 0.0 })
        .collect();

    let n = examples.len() as f64;
    let objective = |weights: &[f64], bias: f64| -> f64 {
        let data_loss: f64 = features
            .iter()
            .zip(&targets)
            .map(|(example, &target)| {
                let z = bias + example.iter().map(|&i| weights[i]).sum::<f64>();
                // ln(1 + e^{-yz}) with y ∈ {−1, +1} encoded via the 0/1 target.
                softplus(if target == 1.0 { -z } else { z })
            })
            .sum();
        let penalty: f64 = weights.iter().map(|w| w * w).sum::<f64>() * hyper.l2 / 2.0;
        data_loss / n + penalty
    };

    let mut losses = Vec::with_capacity(hyper.epochs + 1);
    losses.push(objective(&model.weights, model.bias));
    for _ in 0..hyper.epochs {
        let mut grad_w = vec![0.0f64; model.weights.len()];
        let mut grad_b = 0.0f64;
        for (example, &target) in features.iter().zip(&targets) {
            let z = model.bias + example.iter().map(|&i| model.weights[i]).sum::<f64>();
            let residual = sigmoid(z) - target;
            grad_b += residual;
            for &index in example {
                grad_w[index] += residual;
            }
        }
        for (weight, grad) in model.weights.iter_mut().zip(&grad_w) {
            *weight -= hyper.learning_rate * (grad / n + hyper.l2 * *weight);
        }
        model.bias -= hyper.learning_rate * grad_b / n;
        losses.push(objective(&model.weights, model.bias));
    }
    if !model.bias.is_finite() || model.weights.iter().any(|w| !w.is_finite()) {
        return Err(Error::InvalidArgument(
            "probe training diverged to non-finite weights; lower the learning rate".into(),
        ));
    }
    Ok((model, losses))
}

/// Mann–Whitney AUC of `scores` against binary `labels` (`true` = positive):
/// the fraction of positive–negative pairs ranked correctly, ties counting
/// one half. Errors unless both classes are present.
pub fn auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::InvalidArgument(format!(
            "{} scores but {} labels",
            scores.len(),
            labels.len()
        )));
    }
    let mut positives = Vec::new();
    let mut negatives = Vec::new();
    for (&score, &label) in scores.iter().zip(labels) {
        if !score.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "non-finite score {score}"
            )));
        }
        if label {
            positives.push(score);
        } else {
            negatives.push(score);
        }
    }
    if positives.is_empty() || negatives.is_empty() {
        return Err(Error::InvalidArgument(
            "auc needs both a positive and a negative example".into(),
        ));
    }
    // Count pair wins through two sorted passes instead of the quadratic
    // scan: for each positive, binary-search how many negatives lie below.
    negatives.sort_by(f64::total_cmp);
    let mut wins = 0.0f64;
    for &score in &positives {
        let below = negatives.partition_point(|&neg| neg < score);
        let not_above = negatives.partition_point(|&neg| neg <= score);
        wins += below as f64 + (not_above - below) as f64 / 2.0;
    }
    Ok(wins / (positives.len() as f64 * negatives.len() as f64))
}
