#![allow(dead_code)]

use kgzsl::lexicon::{shipped, EmbeddingKind, EmbeddingTable, SplitManifest};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Phrase-level table with a seeded random vector for every class phrase
/// of `manifest` (auxiliary classes included) and every verb and noun the
/// shipped lexicon extracts from them.
pub fn stub_embeddings(manifest: &SplitManifest, dim: usize, seed: u64) -> EmbeddingTable {
    let lexicon = shipped::lexicon();
    let mut keys: Vec<String> = Vec::new();
    for class in manifest.dataset_classes().iter().chain(&manifest.auxiliary_classes) {
        let phrase = manifest.embedding_key(class).to_string();
        let pair = lexicon.parse_action_phrase(&phrase);
        keys.extend([phrase, pair.verb, pair.noun]);
    }
    keys.sort();
    keys.dedup();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut table = EmbeddingTable::new(dim, EmbeddingKind::PhraseLevel);
    for k in keys {
        let v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        table.insert(&k, v).unwrap();
    }
    table
}
