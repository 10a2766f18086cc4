//! COCO 2017 annotation ingestion.
//!
//! Reads the published JSON structure of a captions file and an instances
//! file for one split. Only four fields are consumed: image id and caption
//! text from the captions file, category and per-annotation presence (the
//! box list) from the instances file. Everything else is ignored.

use std::fs;
use std::path::Path;

use serde::Deserialize;
use std::collections::HashMap;

use crate::corpus::{Corpus, GenderLexicon, ImageRecord, Split};
use crate::{Error, Result};

#[derive(Deserialize)]
struct CaptionsFile {
    #[serde(default)]
    annotations: Vec<CaptionAnnotation>,
}

#[derive(Deserialize)]
struct CaptionAnnotation {
    /// Annotation id; captions are ordered by it within a record.
    id: i64,
    image_id: i64,
    caption: String,
}

#[derive(Deserialize)]
struct InstancesFile {
    #[serde(default)]
    annotations: Vec<InstanceAnnotation>,
    #[serde(default)]
    categories: Vec<Category>,
}

#[derive(Deserialize)]
struct InstanceAnnotation {
    image_id: i64,
    category_id: i64,
}

#[derive(Deserialize)]
struct Category {
    id: i64,
    name: String,
}

/// Loads one split's captions + instances annotation files into a corpus.
///
/// A record is created for every image id that carries at least one caption
/// annotation; its captions are sorted by annotation id so downstream caption
/// indices are stable. `person_box_count` is the number of person-category
/// instance annotations for the image — an image with captions but no
/// instance entries simply gets a count of 0. Gender labels are left
/// undefined pending [`Corpus::assign_gender_labels`].
pub fn load_annotations(
    captions_file: &Path,
    instances_file: &Path,
    split: Split,
    lexicon: GenderLexicon,
) -> Result<Corpus> {
    let captions: CaptionsFile = read_json(captions_file, "captions file")?;
    let instances: InstancesFile = read_json(instances_file, "instances file")?;

    // An instances file with annotations but no person category cannot give
    // meaningful person counts; an empty instances file is fine.
    let person_category = instances
        .categories
        .iter()
        .find(|c| c.name == "person")
        .map(|c| c.id);
    if person_category.is_none() && !instances.annotations.is_empty() {
        return Err(Error::malformed(
            "instances file",
            instances_file,
            "no \"person\" category defined",
        ));
    }

    let mut person_counts: HashMap<i64, u32> = HashMap::new();
    if let Some(person) = person_category {
        for annotation in &instances.annotations {
            if annotation.category_id == person {
                *person_counts.entry(annotation.image_id).or_default() += 1;
            }
        }
    }

    let mut by_image: HashMap<i64, Vec<(i64, String)>> = HashMap::new();
    for annotation in captions.annotations {
        if annotation.caption.trim().is_empty() {
            return Err(Error::malformed(
                "captions file",
                captions_file,
                format!(
                    "caption annotation {} for image {} is empty",
                    annotation.id, annotation.image_id
                ),
            ));
        }
        by_image
            .entry(annotation.image_id)
            .or_default()
            .push((annotation.id, annotation.caption));
    }

    let records = by_image
        .into_iter()
        .map(|(image_id, mut captions)| {
            captions.sort_by_key(|&(annotation_id, _)| annotation_id);
            let texts = captions.into_iter().map(|(_, text)| text).collect();
            let count = person_counts.get(&image_id).copied().unwrap_or(0);
            ImageRecord::real(image_id.to_string(), split, texts, count)
        })
        .collect();
    Corpus::new(records, lexicon)
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path, what: &'static str) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::malformed(what, path, e.to_string()))
}
