//! Splittable, reproducible random streams.
//!
//! A [`RandomStream`] is a key, not a generator: it names a position in a
//! tree of streams rooted at a user seed. Deriving a child never consumes
//! randomness, so the output of a replication depends only on the path of
//! indices that names it and never on scheduling. Generators are ChaCha8
//! instances keyed from the seed, with the 64-bit ChaCha stream selector
//! taken from the hashed path.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator handed out by [`RandomStream::rng`].
pub type StreamRng = ChaCha8Rng;

/// Component tags used to split a replication's stream by purpose.
pub mod tags {
    pub const JUMPS: u64 = 1;
    pub const BROWNIAN: u64 = 2;
    pub const REMAINDER: u64 = 3;
    pub const MARKS: u64 = 4;
    pub const LIMIT_BROWNIAN: u64 = 5;
    pub const PILOT: u64 = 16;
    pub const ESTIMATE: u64 = 17;
    pub const ORACLE: u64 = 18;
    pub const CLT: u64 = 19;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct RandomStream {
    seed: u64,
    path: u64,
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl RandomStream {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            path: splitmix64(0x6C65_7679_6D6C_6D63),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Child stream named by `(stream, substream)`.
    pub fn derive(&self, stream: u64, substream: u64) -> Self {
        let a = splitmix64(self.path ^ splitmix64(stream ^ 0xA076_1D64_78BD_642F));
        let b = splitmix64(a ^ splitmix64(substream ^ 0xE703_7ED1_A0B4_28DB));
        Self {
            seed: self.seed,
            path: b,
        }
    }

    /// Child stream for a single tag.
    pub fn child(&self, tag: u64) -> Self {
        self.derive(tag, u64::MAX)
    }

    pub fn rng(&self) -> StreamRng {
        let mut key = [0u8; 32];
        let mut s = self.seed;
        for chunk in key.chunks_exact_mut(8) {
            s = splitmix64(s);
            chunk.copy_from_slice(&s.to_le_bytes());
        }
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(self.path);
        rng
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn same_key_same_numbers() {
        let s = RandomStream::new(7).derive(3, 11);
        let a: Vec<u64> = (0..8)
            .map({
                let mut r = s.rng();
                move |_| r.random()
            })
            .collect();
        let mut r = RandomStream::new(7).derive(3, 11).rng();
        let b: Vec<u64> = (0..8).map(|_| r.random()).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn siblings_differ() {
        let root = RandomStream::new(1);
        let mut seen = std::collections::HashSet::new();
        for k in 0..20 {
            for i in 0..200 {
                let mut r = root.derive(k, i).rng();
                assert!(seen.insert(r.random::<u64>()));
            }
        }
        assert_ne!(root.derive(1, 2), root.derive(2, 1));
    }

    #[test]
    fn seeds_separate_streams() {
        let mut a = RandomStream::new(1).derive(0, 0).rng();
        let mut b = RandomStream::new(2).derive(0, 0).rng();
        assert_ne!(a.random::<u64>(), b.random::<u64>());
    }

    #[test]
    fn sibling_streams_uncorrelated() {
        let root = RandomStream::new(99);
        let mut a = root.derive(1, 0).rng();
        let mut b = root.derive(1, 1).rng();
        let n = 100_000;
        let mut sxy = 0.0;
        for _ in 0..n {
            let x: f64 = a.random::<f64>() - 0.5;
            let y: f64 = b.random::<f64>() - 0.5;
            sxy += x * y;
        }
        // sd of the normalised mean is 1/sqrt(n)
        let corr = sxy / n as f64 / (1.0 / 12.0);
        assert!(corr.abs() < 4.0 / (n as f64).sqrt());
    }
}
