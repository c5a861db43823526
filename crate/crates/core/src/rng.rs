//! Deterministic randomness.
//!
//! Every replica of every experiment draws from its own ChaCha8 stream,
//! addressed by `(seed, stream_index)`. The keystream is a pure function of
//! that pair, so results do not depend on which worker thread ran a replica
//! or in which order replicas were scheduled.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TWO_POW_NEG_53: f64 = 1.0 / (1u64 << 53) as f64;

/// A reproducible uniform source tied to one replica.
#[derive(Debug, Clone)]
pub struct RandomSource {
    seed: u64,
    stream_index: u64,
    rng: ChaCha8Rng,
}

impl RandomSource {
    pub fn new(seed: u64, stream_index: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_index);
        Self {
            seed,
            stream_index,
            rng,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_index(&self) -> u64 {
        self.stream_index
    }

    /// Source for replica `stream_index` of the experiment labelled `label`.
    ///
    /// Different labels under the same master seed give unrelated key
    /// material, so two experiments in one run never share a stream.
    pub fn for_experiment(seed: u64, label: &str, stream_index: u64) -> Self {
        Self::new(derive_seed(seed, label), stream_index)
    }

    /// Uniform on `[0, 1)` with 53 random bits.
    pub fn next_uniform(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * TWO_POW_NEG_53
    }

    /// Fair bit.
    pub fn next_bit(&mut self) -> bool {
        self.rng.next_u64() >> 63 == 1
    }

    /// Uniform integer in `0..n` (unbiased, by rejection). `n` must be positive.
    pub fn next_below(&mut self, n: u64) -> u64 {
        assert!(n > 0, "next_below(0)");
        let zone = u64::MAX - (u64::MAX - n + 1) % n;
        loop {
            let v = self.rng.next_u64();
            if v <= zone {
                return v % n;
            }
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }
}

/// SplitMix64 finalizer.
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a text label into a master seed (FNV-1a over the label, then SplitMix).
pub fn derive_seed(seed: u64, label: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    mix64(seed ^ mix64(h))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_and_stream_repeat() {
        let mut a = RandomSource::new(7, 3);
        let mut b = RandomSource::new(7, 3);
        for _ in 0..1000 {
            assert_eq!(a.next_uniform().to_bits(), b.next_uniform().to_bits());
        }
    }

    #[test]
    fn streams_differ() {
        let mut a = RandomSource::new(7, 0);
        let mut b = RandomSource::new(7, 1);
        let xs: Vec<u64> = (0..16).map(|_| a.next_u64()).collect();
        let ys: Vec<u64> = (0..16).map(|_| b.next_u64()).collect();
        assert_ne!(xs, ys);
    }

    #[test]
    fn experiment_labels_separate_streams() {
        let mut a = RandomSource::for_experiment(1, "quad", 0);
        let mut b = RandomSource::for_experiment(1, "bisector", 0);
        assert_ne!(a.next_u64(), b.next_u64());
    }

    #[test]
    fn uniform_mean_million_draws() {
        let mut src = RandomSource::new(1, 0);
        let n = 1_000_000;
        let mut sum = 0.0;
        for _ in 0..n {
            let u = src.next_uniform();
            assert!((0.0..1.0).contains(&u));
            sum += u;
        }
        // 3 sigma with sigma = (1/sqrt(12)) / 1000 is about 0.00087.
        assert!((sum / n as f64 - 0.5).abs() < 0.002);
    }

    #[test]
    fn below_is_roughly_uniform() {
        let mut src = RandomSource::new(5, 0);
        let mut counts = [0usize; 6];
        for _ in 0..60_000 {
            counts[src.next_below(6) as usize] += 1;
        }
        for c in counts {
            assert!((c as f64 - 10_000.0).abs() < 400.0, "{counts:?}");
        }
    }
}
