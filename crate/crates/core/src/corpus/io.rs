//! Line-oriented interchange formats for corpora and contrast sets.
//!
//! Corpus export is one record per line with tab-separated fields
//! `{id, split, gender_label, person_box_count, origin, captions}`, captions
//! joined by the unit separator (U+001F). Record construction sanitizes
//! captions and validates ids/tags, so the format is unambiguous.
//!
//! Contrast sets are a three-column CSV `{base_id, male_edit_id,
//! female_edit_id}` with a header row. Ids never contain commas (reserved
//! characters are rejected at corpus construction and ids are COCO-derived
//! tokens), so no quoting is needed.

use std::fs;
use std::path::Path;

use crate::corpus::{
    ContrastPair, ContrastSet, Corpus, GenderLexicon, ImageRecord, Origin,
};
use crate::{Error, Result};

const UNIT_SEPARATOR: char = '\u{1f}';
const CONTRAST_HEADER: &str = "base_id,male_edit_id,female_edit_id";

/// Writes a corpus in the tab-separated export format.
pub fn write_corpus_tsv(corpus: &Corpus, path: &Path) -> Result<()> {
    let mut out = String::new();
    for record in corpus.records() {
        let origin = match &record.origin {
            Origin::Real => "real".to_string(),
            Origin::Synthetic {
                target_gender,
                source_id,
                edit_instruction_tag,
                guidance_tag,
            } => format!(
                "synthetic|{target_gender}|{source_id}|{edit_instruction_tag}|{guidance_tag}"
            ),
        };
        let mut captions = String::new();
        for (i, caption) in record.captions.iter().enumerate() {
            if i > 0 {
                captions.push(UNIT_SEPARATOR);
            }
            captions.push_str(caption);
        }
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\n",
            record.id, record.split, record.gender_label, record.person_box_count, origin,
            captions
        ));
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Reads a corpus from the tab-separated export format. Gender labels are
/// taken from the file as-is (they are re-derivable from captions for
/// un-neutralized corpora, but neutralized exports keep their image labels).
pub fn read_corpus_tsv(path: &Path, lexicon: GenderLexicon) -> Result<Corpus> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut records = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let context = |detail: String| Error::malformed("corpus tsv", path, detail);
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 6 {
            return Err(context(format!(
                "line {}: expected 6 tab-separated fields, found {}",
                lineno + 1,
                fields.len()
            )));
        }
        let [id, split, label, count, origin, captions] = [
            fields[0], fields[1], fields[2], fields[3], fields[4], fields[5],
        ];
        let split = split
            .parse()
            .map_err(|e: Error| context(format!("line {}: {e}", lineno + 1)))?;
        let gender_label = label
            .parse()
            .map_err(|e: Error| context(format!("line {}: {e}", lineno + 1)))?;
        let person_box_count: u32 = count.parse().map_err(|_| {
            context(format!(
                "line {}: person_box_count {count:?} is not a non-negative integer",
                lineno + 1
            ))
        })?;
        let origin = parse_origin(origin)
            .ok_or_else(|| context(format!("line {}: bad origin field {origin:?}", lineno + 1)))?;
        let captions: Vec<String> = captions
            .split(UNIT_SEPARATOR)
            .map(str::to_string)
            .collect();
        let mut record = match origin {
            Origin::Real => ImageRecord::real(id, split, captions, person_box_count),
            Origin::Synthetic {
                target_gender,
                source_id,
                edit_instruction_tag,
                guidance_tag,
            } => ImageRecord::synthetic(
                id,
                split,
                captions,
                person_box_count,
                target_gender,
                source_id,
                edit_instruction_tag,
                guidance_tag,
            ),
        };
        record.gender_label = gender_label;
        records.push(record);
    }
    Corpus::new(records, lexicon)
}

fn parse_origin(field: &str) -> Option<Origin> {
    if field == "real" {
        return Some(Origin::Real);
    }
    let parts: Vec<&str> = field.split('|').collect();
    match parts.as_slice() {
        ["synthetic", target, source, edit_tag, guidance_tag] => Some(Origin::Synthetic {
            target_gender: target.parse().ok()?,
            source_id: source.to_string(),
            edit_instruction_tag: edit_tag.to_string(),
            guidance_tag: guidance_tag.to_string(),
        }),
        _ => None,
    }
}

/// Writes a contrast set as a three-column CSV with a header row.
pub fn write_contrast_set_csv(set: &ContrastSet, path: &Path) -> Result<()> {
    let mut out = String::from(CONTRAST_HEADER);
    out.push('\n');
    for pair in set.pairs() {
        out.push_str(&format!(
            "{},{},{}\n",
            pair.base_id, pair.male_edit_id, pair.female_edit_id
        ));
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Reads a contrast set written by [`write_contrast_set_csv`].
pub fn read_contrast_set_csv(path: &Path) -> Result<ContrastSet> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    match lines.next() {
        Some(header) if header == CONTRAST_HEADER => {}
        other => {
            return Err(Error::malformed(
                "contrast set csv",
                path,
                format!("expected header {CONTRAST_HEADER:?}, found {other:?}"),
            ))
        }
    }
    let mut pairs = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(Error::malformed(
                "contrast set csv",
                path,
                format!("line {}: expected 3 fields, found {}", lineno + 2, fields.len()),
            ));
        }
        pairs.push(ContrastPair {
            base_id: fields[0].to_string(),
            male_edit_id: fields[1].to_string(),
            female_edit_id: fields[2].to_string(),
        });
    }
    ContrastSet::new(pairs)
}
