//! Captioned image corpora with caption-derived gender labels.
//!
//! A [`Corpus`] holds [`ImageRecord`]s — real images ingested from COCO-style
//! annotations, or synthetic gender-edited variants of real images — together
//! with the [`GenderLexicon`] that defines which caption words carry gender.
//! Labeling, neutralization and gender-swapping all go through the lexicon so
//! that every downstream number is reproducible from (annotations, lexicon)
//! alone.
//!
//! Records are kept sorted by id; all iteration, sampling and selection
//! orders derive from that, which is what makes seeded operations
//! reproducible.

mod coco;
mod io;
pub mod lexicon;
pub mod text;

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::filter::FilterDecision;
use crate::{rng, Error, Result};

pub use coco::load_annotations;
pub use io::{read_contrast_set_csv, read_corpus_tsv, write_contrast_set_csv, write_corpus_tsv};
pub use lexicon::{GenderLexicon, LexiconEntry};

/// A binary gender attribute (the only attribute this toolkit measures).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gender {
    Male,
    Female,
}

impl Gender {
    /// The opposite attribute value.
    pub fn opposite(self) -> Gender {
        match self {
            Gender::Male => Gender::Female,
            Gender::Female => Gender::Male,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Gender::Male => "male",
            Gender::Female => "female",
        }
    }
}

impl fmt::Display for Gender {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Gender {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "male" => Ok(Gender::Male),
            "female" => Ok(Gender::Female),
            other => Err(Error::InvalidArgument(format!(
                "unknown gender {other:?} (expected \"male\" or \"female\")"
            ))),
        }
    }
}

/// Caption-derived gender label of an image: definite male/female mentions,
/// or undefined when the captions mention both genders or neither.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GenderLabel {
    Male,
    Female,
    Undefined,
}

impl GenderLabel {
    /// The definite gender, if the label is not undefined.
    pub fn as_gender(self) -> Option<Gender> {
        match self {
            GenderLabel::Male => Some(Gender::Male),
            GenderLabel::Female => Some(Gender::Female),
            GenderLabel::Undefined => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            GenderLabel::Male => "male",
            GenderLabel::Female => "female",
            GenderLabel::Undefined => "undefined",
        }
    }
}

impl From<Gender> for GenderLabel {
    fn from(g: Gender) -> Self {
        match g {
            Gender::Male => GenderLabel::Male,
            Gender::Female => GenderLabel::Female,
        }
    }
}

impl fmt::Display for GenderLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GenderLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "male" => Ok(GenderLabel::Male),
            "female" => Ok(GenderLabel::Female),
            "undefined" => Ok(GenderLabel::Undefined),
            other => Err(Error::InvalidArgument(format!(
                "unknown gender label {other:?}"
            ))),
        }
    }
}

/// Dataset split a record belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            other => Err(Error::InvalidArgument(format!(
                "unknown split {other:?} (expected \"train\" or \"val\")"
            ))),
        }
    }
}

/// Where a record came from: a real photograph, or a synthetic gender edit of
/// a real one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Origin {
    Real,
    Synthetic {
        /// Gender the edit was steered towards.
        target_gender: Gender,
        /// Id of the real record the edit was derived from.
        source_id: String,
        /// Opaque tag identifying the edit instruction used.
        edit_instruction_tag: String,
        /// Opaque tag identifying the guidance configuration used.
        guidance_tag: String,
    },
}

impl Origin {
    pub fn is_real(&self) -> bool {
        matches!(self, Origin::Real)
    }
}

/// One captioned image.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageRecord {
    /// Unique token; sorts lexicographically for all deterministic orderings.
    pub id: String,
    pub split: Split,
    /// Non-empty caption list (typically 5 for COCO).
    pub captions: Vec<String>,
    /// Number of person-category boxes in the image's instance annotations.
    pub person_box_count: u32,
    /// Caption-derived label; `Undefined` until labels are assigned.
    pub gender_label: GenderLabel,
    pub origin: Origin,
}

impl ImageRecord {
    /// Creates a real (non-synthetic) record with an undefined label.
    /// Control whitespace and the TSV unit separator inside captions are
    /// collapsed to plain spaces so records survive the line-oriented export
    /// format; tokenization is unaffected either way.
    pub fn real(
        id: impl Into<String>,
        split: Split,
        captions: Vec<String>,
        person_box_count: u32,
    ) -> Self {
        ImageRecord {
            id: id.into(),
            split,
            captions: captions.into_iter().map(|c| sanitize_caption(&c)).collect(),
            person_box_count,
            gender_label: GenderLabel::Undefined,
            origin: Origin::Real,
        }
    }

    /// Creates a synthetic record derived from `source_id`. Captions are
    /// sanitized as for [`ImageRecord::real`].
    #[allow(clippy::too_many_arguments)]
    pub fn synthetic(
        id: impl Into<String>,
        split: Split,
        captions: Vec<String>,
        person_box_count: u32,
        target_gender: Gender,
        source_id: impl Into<String>,
        edit_instruction_tag: impl Into<String>,
        guidance_tag: impl Into<String>,
    ) -> Self {
        ImageRecord {
            id: id.into(),
            split,
            captions: captions.into_iter().map(|c| sanitize_caption(&c)).collect(),
            person_box_count,
            gender_label: GenderLabel::Undefined,
            origin: Origin::Synthetic {
                target_gender,
                source_id: source_id.into(),
                edit_instruction_tag: edit_instruction_tag.into(),
                guidance_tag: guidance_tag.into(),
            },
        }
    }
}

/// Replaces control whitespace and the unit separator with plain spaces.
fn sanitize_caption(caption: &str) -> String {
    caption.replace(['\t', '\n', '\r', '\u{1f}'], " ")
}

/// Characters that would break the line-oriented export formats if they
/// appeared inside ids or origin tags.
fn validate_token(id: &str, what: &str, value: &str) -> Result<()> {
    if value.is_empty() && what == "id" {
        return Err(Error::Record {
            id: id.to_string(),
            detail: "empty id".into(),
        });
    }
    if value.contains(['\t', '\n', '\r', '\u{1f}', '|']) {
        return Err(Error::Record {
            id: id.to_string(),
            detail: format!("{what} {value:?} contains a reserved character"),
        });
    }
    Ok(())
}

/// An id-indexed, id-sorted collection of records plus the lexicon that
/// interprets their captions.
#[derive(Debug, Clone)]
pub struct Corpus {
    records: Vec<ImageRecord>,
    index: HashMap<String, usize>,
    lexicon: GenderLexicon,
}

impl Corpus {
    /// Builds a corpus, sorting records by id and validating invariants:
    /// unique ids, non-empty caption lists, no reserved characters in ids or
    /// origin tags, and no synthetic record deriving from another synthetic
    /// record. (A synthetic record's source need not be present — subset
    /// corpora drop bases routinely — but if present it must be real.)
    pub fn new(mut records: Vec<ImageRecord>, lexicon: GenderLexicon) -> Result<Self> {
        records.sort_by(|a, b| a.id.cmp(&b.id));
        let mut index = HashMap::with_capacity(records.len());
        for (i, record) in records.iter().enumerate() {
            validate_token(&record.id, "id", &record.id)?;
            if record.captions.is_empty() {
                return Err(Error::Record {
                    id: record.id.clone(),
                    detail: "captions list is empty".into(),
                });
            }
            if let Origin::Synthetic {
                source_id,
                edit_instruction_tag,
                guidance_tag,
                ..
            } = &record.origin
            {
                validate_token(&record.id, "source_id", source_id)?;
                validate_token(&record.id, "edit_instruction_tag", edit_instruction_tag)?;
                validate_token(&record.id, "guidance_tag", guidance_tag)?;
                if source_id.is_empty() {
                    return Err(Error::Record {
                        id: record.id.clone(),
                        detail: "synthetic record with empty source_id".into(),
                    });
                }
            }
            if index.insert(record.id.clone(), i).is_some() {
                return Err(Error::Record {
                    id: record.id.clone(),
                    detail: "duplicate id".into(),
                });
            }
        }
        let corpus = Corpus {
            records,
            index,
            lexicon,
        };
        for record in &corpus.records {
            if let Origin::Synthetic { source_id, .. } = &record.origin {
                if let Some(source) = corpus.get(source_id) {
                    if !source.origin.is_real() {
                        return Err(Error::Record {
                            id: record.id.clone(),
                            detail: format!(
                                "synthetic record derives from synthetic record {source_id}"
                            ),
                        });
                    }
                }
            }
        }
        Ok(corpus)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Records in ascending id order.
    pub fn records(&self) -> &[ImageRecord] {
        &self.records
    }

    pub fn get(&self, id: &str) -> Option<&ImageRecord> {
        self.index.get(id).map(|&i| &self.records[i])
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index.contains_key(id)
    }

    /// Ids in ascending order.
    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.records.iter().map(|r| r.id.as_str())
    }

    pub fn lexicon(&self) -> &GenderLexicon {
        &self.lexicon
    }

    /// Derives every record's gender label from its captions: the captions
    /// are concatenated into one paragraph and the label is male/female when
    /// the paragraph mentions exactly one gender, undefined otherwise.
    pub fn assign_gender_labels(&mut self) {
        for record in &mut self.records {
            record.gender_label = text::derive_label(&record.captions, &self.lexicon);
        }
    }

    /// Returns a copy with every caption gender-neutralized. Gender labels
    /// are carried over unchanged — they describe the underlying images,
    /// which neutralization deliberately hides from the caption text.
    pub fn neutralized(&self) -> Corpus {
        let records = self
            .records
            .iter()
            .map(|r| {
                let mut r = r.clone();
                r.captions = r
                    .captions
                    .iter()
                    .map(|c| text::neutralize_caption(c, &self.lexicon))
                    .collect();
                r
            })
            .collect();
        Corpus::new(records, self.lexicon.clone()).expect("neutralization preserves invariants")
    }

    /// Subset of records depicting exactly one person with a definite gender
    /// label (`person_box_count == 1` and label ≠ undefined).
    pub fn select_single_person_gendered(&self) -> Corpus {
        let records = self
            .records
            .iter()
            .filter(|r| r.person_box_count == 1 && r.gender_label != GenderLabel::Undefined)
            .cloned()
            .collect();
        Corpus::new(records, self.lexicon.clone()).expect("subset preserves invariants")
    }

    /// Subset of records belonging to `split`.
    pub fn select_split(&self, split: Split) -> Corpus {
        let records = self
            .records
            .iter()
            .filter(|r| r.split == split)
            .cloned()
            .collect();
        Corpus::new(records, self.lexicon.clone()).expect("subset preserves invariants")
    }

    /// Gender-balanced subset: the minority gender's records are kept whole
    /// and the majority gender is undersampled uniformly without replacement
    /// under `seed`. Undefined-label records are dropped — balance is defined
    /// over the two definite classes only. Deterministic per seed.
    ///
    /// Errors if either gender has no records.
    pub fn balance_by_gender(&self, seed: u64) -> Result<Corpus> {
        let of_gender = |label: GenderLabel| -> Vec<&ImageRecord> {
            self.records
                .iter()
                .filter(|r| r.gender_label == label)
                .collect()
        };
        let males = of_gender(GenderLabel::Male);
        let females = of_gender(GenderLabel::Female);
        if males.is_empty() || females.is_empty() {
            let missing = if males.is_empty() { "male" } else { "female" };
            return Err(Error::InvalidArgument(format!(
                "cannot balance by gender: no records labeled {missing}"
            )));
        }
        let target = males.len().min(females.len());
        let mut rng = rng::seeded(seed);
        let mut keep = |records: &[&ImageRecord]| -> Vec<ImageRecord> {
            if records.len() == target {
                records.iter().map(|&r| r.clone()).collect()
            } else {
                rng::sample_indices(&mut rng, records.len(), target)
                    .into_iter()
                    .map(|i| records[i].clone())
                    .collect()
            }
        };
        // Fixed male-then-female order keeps the RNG stream layout stable.
        let mut records = keep(&males);
        records.extend(keep(&females));
        Corpus::new(records, self.lexicon.clone())
    }

    /// Builds the contrast set: for every base id that has at least one
    /// accepted male edit and one accepted female edit among `decisions`,
    /// picks exactly one accepted edit per gender uniformly at random under
    /// `seed`; bases missing either gender are dropped. Edit ids must resolve
    /// to synthetic records consistent with their decision rows.
    pub fn assemble_contrast_set(
        &self,
        decisions: &[FilterDecision],
        seed: u64,
    ) -> Result<ContrastSet> {
        // base id -> (accepted male edit ids, accepted female edit ids)
        let mut by_base: HashMap<&str, (Vec<&str>, Vec<&str>)> = HashMap::new();
        for decision in decisions {
            let record = self
                .get(&decision.edit_id)
                .ok_or_else(|| Error::UnknownId {
                    kind: "image",
                    id: decision.edit_id.clone(),
                })?;
            match &record.origin {
                Origin::Synthetic {
                    target_gender,
                    source_id,
                    ..
                } => {
                    if *source_id != decision.base_id || *target_gender != decision.target_gender {
                        return Err(Error::Record {
                            id: decision.edit_id.clone(),
                            detail: format!(
                                "decision metadata (base {}, target {}) disagrees with record \
                                 origin (base {}, target {})",
                                decision.base_id, decision.target_gender, source_id, target_gender
                            ),
                        });
                    }
                }
                Origin::Real => {
                    return Err(Error::Record {
                        id: decision.edit_id.clone(),
                        detail: "decision references a real record".into(),
                    });
                }
            }
            if !decision.accepted {
                continue;
            }
            let slot = by_base.entry(decision.base_id.as_str()).or_default();
            match decision.target_gender {
                Gender::Male => slot.0.push(decision.edit_id.as_str()),
                Gender::Female => slot.1.push(decision.edit_id.as_str()),
            }
        }

        let mut bases: Vec<&str> = by_base
            .iter()
            .filter(|(_, (m, f))| !m.is_empty() && !f.is_empty())
            .map(|(&base, _)| base)
            .collect();
        bases.sort_unstable();

        let mut rng = rng::seeded(seed);
        let mut pairs = Vec::with_capacity(bases.len());
        for base in bases {
            let (males, females) = by_base.get_mut(base).expect("base collected above");
            males.sort_unstable();
            males.dedup();
            females.sort_unstable();
            females.dedup();
            let male = males[rng.random_range(0..males.len())];
            let female = females[rng.random_range(0..females.len())];
            pairs.push(ContrastPair {
                base_id: base.to_string(),
                male_edit_id: male.to_string(),
                female_edit_id: female.to_string(),
            });
        }
        ContrastSet::new(pairs)
    }
}

/// One base image paired with one accepted edit per gender.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContrastPair {
    pub base_id: String,
    pub male_edit_id: String,
    pub female_edit_id: String,
}

/// A set of gender contrast pairs with unique base ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContrastSet {
    pairs: Vec<ContrastPair>,
}

impl ContrastSet {
    /// Builds a contrast set, validating that base ids are unique. Pairs are
    /// kept sorted by base id.
    pub fn new(mut pairs: Vec<ContrastPair>) -> Result<Self> {
        pairs.sort_by(|a, b| a.base_id.cmp(&b.base_id));
        for window in pairs.windows(2) {
            if window[0].base_id == window[1].base_id {
                return Err(Error::Record {
                    id: window[0].base_id.clone(),
                    detail: "base id appears in more than one contrast pair".into(),
                });
            }
        }
        Ok(ContrastSet { pairs })
    }

    pub fn pairs(&self) -> &[ContrastPair] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// All edit ids (two per pair), in pair order.
    pub fn edit_ids(&self) -> impl Iterator<Item = &str> {
        self.pairs
            .iter()
            .flat_map(|p| [p.male_edit_id.as_str(), p.female_edit_id.as_str()])
    }
}
