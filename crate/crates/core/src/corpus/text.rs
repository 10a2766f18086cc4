//! Caption tokenization and lexicon-driven rewrites.
//!
//! Word matching is deliberately simple and context-free: captions are split
//! into tokens on every non-alphabetic character and a lexicon word matches
//! only a whole token, case-insensitively. "mannequin" never matches "man",
//! and a possessive like "man's" splits into the tokens `man` + `s`, so the
//! gendered head is rewritten and the dangling `s` is left untouched.
//!
//! Replacements keep the surrounding text byte-identical and preserve a
//! leading capital letter ("His" → "Their"); all other casing comes from the
//! lexicon form.

use crate::corpus::lexicon::GenderLexicon;
use crate::corpus::{Gender, GenderLabel};

/// Splits text into alphabetic tokens (original casing, in order).
pub fn tokens(text: &str) -> impl Iterator<Item = &str> {
    text.split(|c: char| !c.is_alphabetic())
        .filter(|t| !t.is_empty())
}

/// Splits text into lowercased alphabetic tokens.
pub fn lowercase_tokens(text: &str) -> impl Iterator<Item = String> + '_ {
    tokens(text).map(str::to_lowercase)
}

#[derive(Clone, Copy)]
enum Rewrite {
    Neutralize,
    Swap(Gender),
}

/// Replaces every masculine/feminine lexicon token with its neutral form.
/// Idempotent; the output contains no gendered lexicon word.
pub fn neutralize_caption(text: &str, lexicon: &GenderLexicon) -> String {
    rewrite(text, lexicon, Rewrite::Neutralize)
}

/// Replaces every gendered lexicon token with the same entry's form of
/// `target` gender. Tokens already carrying the target gender, and all
/// non-lexicon text, are left byte-identical. Idempotent per target.
pub fn swap_caption_gender(text: &str, target: Gender, lexicon: &GenderLexicon) -> String {
    rewrite(text, lexicon, Rewrite::Swap(target))
}

fn rewrite(text: &str, lexicon: &GenderLexicon, mode: Rewrite) -> String {
    let mut out = String::with_capacity(text.len());
    let mut token_start: Option<usize> = None;
    for (i, c) in text.char_indices() {
        if c.is_alphabetic() {
            token_start.get_or_insert(i);
        } else {
            if let Some(start) = token_start.take() {
                push_rewritten(&mut out, &text[start..i], lexicon, mode);
            }
            out.push(c);
        }
    }
    if let Some(start) = token_start {
        push_rewritten(&mut out, &text[start..], lexicon, mode);
    }
    out
}

fn push_rewritten(out: &mut String, token: &str, lexicon: &GenderLexicon, mode: Rewrite) {
    let replacement = match mode {
        Rewrite::Neutralize => lexicon.neutral_for(token),
        Rewrite::Swap(target) => match lexicon.classify(token) {
            // A token already carrying the target gender stays byte-identical.
            Some(gender) if gender == target => None,
            Some(_) => lexicon.swap_for(token, target),
            None => None,
        },
    };
    match replacement {
        None => out.push_str(token),
        Some(repl) => {
            let capitalized = token.chars().next().is_some_and(char::is_uppercase);
            if capitalized {
                let mut chars = repl.chars();
                if let Some(first) = chars.next() {
                    out.extend(first.to_uppercase());
                    out.push_str(chars.as_str());
                }
            } else {
                out.push_str(repl);
            }
        }
    }
}

/// Derives the gender label for a record from all of its captions at once:
/// the captions are treated as one concatenated paragraph, and the label is
/// `Male` if the paragraph contains at least one masculine lexicon word and no
/// feminine one, `Female` for the mirror case, and `Undefined` when words of
/// both genders or of neither gender appear.
pub fn derive_label(captions: &[String], lexicon: &GenderLexicon) -> GenderLabel {
    let mut saw_male = false;
    let mut saw_female = false;
    for caption in captions {
        for token in tokens(caption) {
            match lexicon.classify(token) {
                Some(Gender::Male) => saw_male = true,
                Some(Gender::Female) => saw_female = true,
                None => {}
            }
            if saw_male && saw_female {
                return GenderLabel::Undefined;
            }
        }
    }
    match (saw_male, saw_female) {
        (true, false) => GenderLabel::Male,
        (false, true) => GenderLabel::Female,
        _ => GenderLabel::Undefined,
    }
}
