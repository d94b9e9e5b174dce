//! Embedding tables, verb/noun decomposition of action phrases, and split
//! manifests.

mod embeddings;
mod manifest;
mod parse;
pub mod shipped;

use thiserror::Error;

pub use embeddings::{EmbeddingKind, EmbeddingTable, PhraseEmbedding};
pub use manifest::{auxiliary_node_label, generate_random_splits, SplitManifest};
pub use parse::{Lexicon, NounSource, VerbNounPair, VerbSource, DEFAULT_VERB};

pub type Result<T> = std::result::Result<T, LexiconError>;

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("{source_name}: file is empty")]
    EmptyFile { source_name: String },

    #[error("{source_name} line {line}: {message}")]
    Format {
        source_name: String,
        line: usize,
        message: String,
    },

    #[error("{source_name} line {line}: expected {expected} values, found {got}")]
    DimensionMismatch {
        source_name: String,
        line: usize,
        expected: usize,
        got: usize,
    },

    #[error("phrase `{0}` is not in the embedding table")]
    MissingPhrase(String),

    #[error("no token of `{0}` is in the embedding table")]
    NoTokenFound(String),

    #[error("class `{0}` is listed in both train and test")]
    TrainTestOverlap(String),

    #[error("test class `{0}` overlaps with an auxiliary class and cannot be evaluated zero-shot")]
    TestInOverlap(String),

    #[error("class `{class}` appears twice in [{section}]")]
    DuplicateClass { section: &'static str, class: String },

    #[error("[{section}] names `{class}`, which is not a train or test class")]
    UnknownClass { section: &'static str, class: String },

    #[error("cannot draw {requested} test classes from an eligible pool of {available}")]
    TooManyTestClasses { requested: usize, available: usize },

    #[error("unknown shipped dataset `{0}` (expected ucf101, hmdb51 or charades)")]
    UnknownDataset(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Lowercases, turns underscores and punctuation into spaces, drops
/// apostrophes and collapses runs of whitespace.
pub fn normalize_phrase(phrase: &str) -> String {
    let mut cleaned = String::with_capacity(phrase.len());
    for c in phrase.chars() {
        if c == '\'' || c == '\u{2019}' {
            continue;
        }
        if c.is_alphanumeric() {
            cleaned.extend(c.to_lowercase());
        } else {
            cleaned.push(' ');
        }
    }
    cleaned.split_whitespace().collect::<Vec<_>>().join(" ")
}

#[cfg(test)]
mod tests {
    use super::normalize_phrase;

    #[test]
    fn normalization_cases() {
        assert_eq!(normalize_phrase("Apply_Eye  Makeup"), "apply eye makeup");
        assert_eq!(normalize_phrase("tai chi (exercise)"), "tai chi exercise");
        assert_eq!(normalize_phrase("person's doorknob"), "persons doorknob");
        assert_eq!(normalize_phrase("  ---  "), "");
        assert_eq!(normalize_phrase("yo-yo"), "yo yo");
    }
}
