//! Drops utterances made only of filler words.

use std::collections::BTreeSet;

const DEFAULT_LEXICON: &str = include_str!("../../prompts/interjections.txt");

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InterjectionFilter {
    lexicon: BTreeSet<String>,
}

impl Default for InterjectionFilter {
    fn default() -> Self {
        Self::from_lexicon(DEFAULT_LEXICON)
    }
}

impl InterjectionFilter {
    /// Parses a lexicon file: one token per line, `#` comments allowed.
    pub fn from_lexicon(text: &str) -> Self {
        let lexicon = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(|l| l.to_ascii_lowercase())
            .collect();
        Self { lexicon }
    }

    /// True when something other than interjections remains.
    pub fn should_send(&self, transcript: &str) -> bool {
        tokens(transcript).any(|t| !self.lexicon.contains(&t))
    }
}

fn tokens(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_ascii_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(|t| t.to_ascii_lowercase())
}

/// Whether the transcript should be sent, using the shipped lexicon.
pub fn filter_interjections(transcript: &str) -> bool {
    InterjectionFilter::default().should_send(transcript)
}
