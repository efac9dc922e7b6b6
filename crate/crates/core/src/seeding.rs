//! Keyed random streams.
//!
//! Every randomized procedure derives its generator from `(seed, domain, key)`
//! rather than sharing one mutable stream, so work items can run in any order
//! or on any number of threads and still draw the same numbers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type StreamRng = ChaCha8Rng;

fn derive(seed: u64, domain: &str, key: &[u8]) -> StreamRng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update((domain.len() as u64).to_le_bytes());
    h.update(domain.as_bytes());
    h.update((key.len() as u64).to_le_bytes());
    h.update(key);
    let digest: [u8; 32] = h.finalize().into();
    ChaCha8Rng::from_seed(digest)
}

/// Stream for the `index`-th work item of a procedure.
pub fn indexed_stream(seed: u64, domain: &str, index: u64) -> StreamRng {
    derive(seed, domain, &index.to_le_bytes())
}

/// Stream keyed by an arbitrary string, e.g. an asset id.
pub fn keyed_stream(seed: u64, domain: &str, key: &str) -> StreamRng {
    derive(seed, domain, key.as_bytes())
}
