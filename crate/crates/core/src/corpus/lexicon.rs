//! Gendered-word lexicon.
//!
//! A lexicon is a list of (masculine, feminine, neutral) word triples, e.g.
//! `father / mother / parent`. It drives three text operations: caption gender
//! labeling, neutralization and gender swapping (see [`crate::corpus::text`]).
//!
//! Invariants enforced at construction:
//!
//! * every form is a non-empty, purely alphabetic word (the tokenizer splits
//!   on non-alphabetic characters, so anything else could never match);
//! * masculine and feminine forms — the match keys — are globally unique:
//!   no masculine or feminine word appears anywhere else in the lexicon, in
//!   any column;
//! * neutral forms never collide with a masculine or feminine form (so
//!   neutralization is idempotent), but may repeat within the neutral column
//!   (`person` is the natural neutral for several pairs).
//!
//! Words are stored lowercase and matched case-insensitively.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use crate::corpus::Gender;
use crate::{Error, Result};

/// One masculine / feminine / neutral triple.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LexiconEntry {
    pub masculine: String,
    pub feminine: String,
    pub neutral: String,
}

impl LexiconEntry {
    fn new(masculine: &str, feminine: &str, neutral: &str) -> Self {
        LexiconEntry {
            masculine: masculine.to_lowercase(),
            feminine: feminine.to_lowercase(),
            neutral: neutral.to_lowercase(),
        }
    }

    /// The form carrying the requested gender.
    pub fn gendered(&self, gender: Gender) -> &str {
        match gender {
            Gender::Male => &self.masculine,
            Gender::Female => &self.feminine,
        }
    }
}

/// Validated lookup table over gendered word triples.
#[derive(Debug, Clone)]
pub struct GenderLexicon {
    entries: Vec<LexiconEntry>,
    /// Lowercased masculine/feminine word -> (entry index, its gender).
    index: HashMap<String, (usize, Gender)>,
}

/// The 14 noun/pronoun triples used for all built-in processing.
const BUILTIN: &[(&str, &str, &str)] = &[
    ("man", "woman", "person"),
    ("men", "women", "people"),
    ("male", "female", "person"),
    ("boy", "girl", "child"),
    ("boys", "girls", "children"),
    ("gentleman", "lady", "person"),
    ("father", "mother", "parent"),
    ("husband", "wife", "partner"),
    ("boyfriend", "girlfriend", "partner"),
    ("brother", "sister", "sibling"),
    ("son", "daughter", "child"),
    ("he", "she", "they"),
    ("his", "her", "their"),
    ("him", "hers", "them"),
];

impl GenderLexicon {
    /// Builds a lexicon from triples, validating all structural invariants.
    pub fn new(entries: Vec<LexiconEntry>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::Lexicon("lexicon has no entries".into()));
        }
        let mut index: HashMap<String, (usize, Gender)> = HashMap::new();
        for (i, entry) in entries.iter().enumerate() {
            for word in [&entry.masculine, &entry.feminine, &entry.neutral] {
                if word.is_empty() || !word.chars().all(|c| c.is_alphabetic()) {
                    return Err(Error::Lexicon(format!(
                        "entry {i}: form {word:?} is not a non-empty alphabetic word"
                    )));
                }
            }
            for (word, gender) in [
                (&entry.masculine, Gender::Male),
                (&entry.feminine, Gender::Female),
            ] {
                if index.insert(word.clone(), (i, gender)).is_some() {
                    return Err(Error::Lexicon(format!(
                        "gendered word {word:?} appears in more than one entry"
                    )));
                }
            }
        }
        // Neutral forms may repeat among themselves, but a neutral word that is
        // also a gendered word would make neutralization non-idempotent.
        for entry in &entries {
            if index.contains_key(&entry.neutral) {
                return Err(Error::Lexicon(format!(
                    "neutral word {:?} is also a gendered word",
                    entry.neutral
                )));
            }
        }
        Ok(GenderLexicon { entries, index })
    }

    /// The built-in noun/pronoun table used when no lexicon file is supplied.
    pub fn builtin() -> Self {
        let entries = BUILTIN
            .iter()
            .map(|&(m, f, n)| LexiconEntry::new(m, f, n))
            .collect();
        GenderLexicon::new(entries).expect("built-in lexicon must validate")
    }

    /// Loads a lexicon from a UTF-8 file with one entry per line: three
    /// tab-separated words (masculine, feminine, neutral). Blank lines are
    /// skipped. Words are lowercased; the usual invariants are enforced.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut entries = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 3 {
                return Err(Error::malformed(
                    "lexicon file",
                    path,
                    format!(
                        "line {}: expected 3 tab-separated words, found {}",
                        lineno + 1,
                        fields.len()
                    ),
                ));
            }
            entries.push(LexiconEntry::new(
                fields[0].trim(),
                fields[1].trim(),
                fields[2].trim(),
            ));
        }
        GenderLexicon::new(entries)
    }

    /// Writes the lexicon in the same tab-separated format accepted by
    /// [`GenderLexicon::load`].
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        for e in &self.entries {
            out.push_str(&format!("{}\t{}\t{}\n", e.masculine, e.feminine, e.neutral));
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    /// All entries in declaration order.
    pub fn entries(&self) -> &[LexiconEntry] {
        &self.entries
    }

    /// Looks a word up among the gendered (masculine/feminine) forms,
    /// case-insensitively. Neutral words do not match.
    pub fn entry_for(&self, word: &str) -> Option<(&LexiconEntry, Gender)> {
        let key = word.to_lowercase();
        self.index
            .get(&key)
            .map(|&(i, gender)| (&self.entries[i], gender))
    }

    /// The gender a word carries, if it is a gendered lexicon word.
    pub fn classify(&self, word: &str) -> Option<Gender> {
        self.entry_for(word).map(|(_, gender)| gender)
    }

    /// The neutral counterpart of a gendered word (`None` for anything else).
    pub fn neutral_for(&self, word: &str) -> Option<&str> {
        self.entry_for(word).map(|(entry, _)| entry.neutral.as_str())
    }

    /// The form of a gendered word carrying `target` gender: the opposite
    /// column for a cross-gender word, the word itself if it already matches.
    /// `None` for non-gendered words.
    pub fn swap_for(&self, word: &str, target: Gender) -> Option<&str> {
        self.entry_for(word).map(|(entry, _)| entry.gendered(target))
    }
}
