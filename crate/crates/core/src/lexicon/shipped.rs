//! Class lists, split manifests and lexicon tables compiled into the crate.

use super::{Lexicon, LexiconError, Result, SplitManifest};

pub const UCF101_MANIFEST: &str = include_str!("../../data/ucf101.manifest");
pub const HMDB51_MANIFEST: &str = include_str!("../../data/hmdb51.manifest");
pub const CHARADES_MANIFEST: &str = include_str!("../../data/charades.manifest");
pub const KINETICS400: &str = include_str!("../../data/kinetics400.txt");

pub const VERBS: &str = include_str!("../../data/lexicon/verbs.tsv");
pub const NOUNS: &str = include_str!("../../data/lexicon/nouns.txt");
pub const LEMMA_EXCEPTIONS: &str = include_str!("../../data/lexicon/lemma_exceptions.tsv");
pub const NOUN_OVERRIDES: &str = include_str!("../../data/lexicon/noun_overrides.tsv");
pub const STOPWORDS: &str = include_str!("../../data/lexicon/stopwords.txt");

pub const DATASETS: [&str; 3] = ["ucf101", "hmdb51", "charades"];

pub fn manifest_text(dataset: &str) -> Result<&'static str> {
    match dataset {
        "ucf101" => Ok(UCF101_MANIFEST),
        "hmdb51" => Ok(HMDB51_MANIFEST),
        "charades" => Ok(CHARADES_MANIFEST),
        other => Err(LexiconError::UnknownDataset(other.to_string())),
    }
}

pub fn manifest(dataset: &str) -> Result<SplitManifest> {
    SplitManifest::parse(manifest_text(dataset)?, &format!("shipped {dataset} manifest"))
}

pub fn lexicon() -> Lexicon {
    Lexicon::from_tables(VERBS, NOUNS, LEMMA_EXCEPTIONS, NOUN_OVERRIDES, STOPWORDS)
}

/// The 400 Kinetics class names as published (not normalised).
pub fn kinetics400() -> Vec<&'static str> {
    KINETICS400.lines().filter(|l| !l.is_empty()).collect()
}
