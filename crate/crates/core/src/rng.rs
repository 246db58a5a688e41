//! Splittable seed streams and the chunked map-reduce used by every estimator.
//!
//! A [`SeedStream`] is a `(seed, key)` pair. Child streams are derived by
//! hashing a label into the key, so any replication can be addressed without
//! touching its siblings. Work is cut into fixed-size chunks whose boundaries
//! depend only on the replication count, never on the thread count, which
//! makes every merged result bit-reproducible for a fixed seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Replications per chunk. Part of the reproducibility contract: changing it
/// changes every seeded result.
pub const CHUNK_LEN: usize = 512;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a(label: &str) -> u64 {
    label.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeedStream {
    seed: u64,
    key: u64,
}

impl SeedStream {
    pub fn new(seed: u64) -> Self {
        Self { seed, key: 0 }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Child stream addressed by an integer label.
    pub fn derive(&self, label: u64) -> Self {
        Self { seed: self.seed, key: splitmix64(self.key ^ splitmix64(label.wrapping_add(GOLDEN))) }
    }

    /// Child stream addressed by a name.
    pub fn derive_str(&self, label: &str) -> Self {
        self.derive(fnv1a(label))
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.key);
        rng
    }
}

/// Runs `count` replications in chunks of [`CHUNK_LEN`], each chunk on its own
/// derived stream, and returns the per-chunk results in chunk order.
///
/// `work` receives the chunk's generator and the number of replications it
/// must perform.
pub fn par_chunks<A, F>(stream: &SeedStream, count: usize, work: F) -> Vec<A>
where
    A: Send,
    F: Fn(&mut ChaCha8Rng, usize) -> A + Sync,
{
    let chunks = count.div_ceil(CHUNK_LEN);
    (0..chunks)
        .into_par_iter()
        .map(|c| {
            let len = CHUNK_LEN.min(count - c * CHUNK_LEN);
            let mut rng = stream.derive(c as u64).rng();
            work(&mut rng, len)
        })
        .collect()
}

/// Mergeable sufficient statistics.
pub trait Merge {
    fn merge(&mut self, other: &Self);
}

/// [`par_chunks`] followed by an in-order merge of the chunk accumulators.
pub fn map_reduce<A, F>(stream: &SeedStream, count: usize, init: A, work: F) -> A
where
    A: Merge + Clone + Send + Sync,
    F: Fn(&mut ChaCha8Rng, &mut A) + Sync,
{
    let parts = par_chunks(stream, count, |rng, len| {
        let mut acc = init.clone();
        for _ in 0..len {
            work(rng, &mut acc);
        }
        acc
    });
    let mut total = init;
    for p in &parts {
        total.merge(p);
    }
    total
}

/// Collects one value per replication, in replication order.
pub fn replicate<T, F>(stream: &SeedStream, count: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut ChaCha8Rng) -> T + Sync,
{
    par_chunks(stream, count, |rng, len| (0..len).map(|_| f(rng)).collect::<Vec<_>>()).into_iter().flatten().collect()
}
