//! Named, independently reproducible random streams derived from one seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type StreamRng = ChaCha8Rng;

/// Derives one generator per named purpose from a root seed, so that
/// drawing more numbers in one component never shifts another.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedStreams {
    root: u64,
}

impl SeedStreams {
    pub fn new(root: u64) -> Self {
        Self { root }
    }

    pub fn root(&self) -> u64 {
        self.root
    }

    pub fn seed_for(&self, name: &str) -> u64 {
        let mut h = Sha256::new();
        h.update(self.root.to_le_bytes());
        h.update(name.as_bytes());
        let digest = h.finalize();
        let mut bytes = [0u8; 8];
        bytes.copy_from_slice(&digest[..8]);
        u64::from_le_bytes(bytes)
    }

    pub fn rng(&self, name: &str) -> StreamRng {
        ChaCha8Rng::seed_from_u64(self.seed_for(name))
    }

    /// A child stream family, e.g. one per sweep point.
    pub fn child(&self, name: &str) -> SeedStreams {
        SeedStreams::new(self.seed_for(name))
    }
}
