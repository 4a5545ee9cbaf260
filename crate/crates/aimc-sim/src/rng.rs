//! Deterministic seed derivation.
//!
//! A single master seed fans out into independent named substreams so that
//! adding a noise source to one component never perturbs the draws seen by
//! another, and so that algorithm comparisons under the same seed consume
//! identical gradient-noise sequences.
//!
//! Derivation: `seed(component, repeat) = splitmix64(master ^ fnv1a(component)
//! ^ splitmix64(repeat))`, feeding `ChaCha12Rng::seed_from_u64`.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

const FNV_OFFSET: u64 = 0xcbf29ce484222325;
const FNV_PRIME: u64 = 0x100000001b3;

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h = FNV_OFFSET;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
    x ^ (x >> 31)
}

/// Derives per-component, per-repeat RNG streams from one master seed.
#[derive(Debug, Clone, Copy)]
pub struct SeedSplitter {
    master: u64,
}

impl SeedSplitter {
    pub fn new(master: u64) -> Self {
        SeedSplitter { master }
    }

    pub fn master(&self) -> u64 {
        self.master
    }

    /// Seed for a named component; `repeat` distinguishes independent runs.
    pub fn seed(&self, component: &str, repeat: u64) -> u64 {
        splitmix64(self.master ^ fnv1a(component.as_bytes()) ^ splitmix64(repeat))
    }

    pub fn stream(&self, component: &str, repeat: u64) -> ChaCha12Rng {
        ChaCha12Rng::seed_from_u64(self.seed(component, repeat))
    }
}

/// The RNG streams one training run owns.
///
/// `grad` drives data sampling and gradient noise, `device` drives pulse
/// cycle variation, `read` drives read noise, `init` drives weight
/// initialization and element variation.
#[derive(Debug, Clone)]
pub struct RunStreams {
    pub grad: ChaCha12Rng,
    pub device: ChaCha12Rng,
    pub read: ChaCha12Rng,
    pub init: ChaCha12Rng,
}

impl RunStreams {
    pub fn new(splitter: &SeedSplitter, repeat: u64) -> Self {
        RunStreams {
            grad: splitter.stream("grad", repeat),
            device: splitter.stream("device", repeat),
            read: splitter.stream("read", repeat),
            init: splitter.stream("init", repeat),
        }
    }
}
