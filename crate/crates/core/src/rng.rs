//! Deterministic random streams.
//!
//! Every stream is a ChaCha20 generator (`rand_chacha::ChaCha20Rng`) seeded
//! from a 64-bit value. Normal variates use `rand_distr::StandardNormal`
//! (ziggurat). Per-chain seeds are derived from the master seed with a
//! SplitMix64 finalizer so chain `i` of master seed `s` is reproducible on its own.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

#[derive(Debug, Clone)]
pub struct RngStream {
    inner: ChaCha20Rng,
    seed: u64,
}

/// SplitMix64 finalizer.
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of chain `index` under `master`.
pub fn chain_seed(master: u64, index: usize) -> u64 {
    mix64(master ^ mix64((index as u64).wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15)))
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self { inner: ChaCha20Rng::seed_from_u64(seed), seed }
    }

    pub fn for_chain(master: u64, index: usize) -> Self {
        Self::new(chain_seed(master, index))
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn normal(&mut self) -> f64 {
        self.inner.sample(StandardNormal)
    }

    pub fn fill_normal(&mut self, out: &mut [f64]) {
        for x in out.iter_mut() {
            *x = self.normal();
        }
    }

    pub fn normal_vec(&mut self, d: usize) -> Vec<f64> {
        let mut v = vec![0.0; d];
        self.fill_normal(&mut v);
        v
    }

    /// Uniform on [0, 1).
    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    /// Uniform on (0, 1); zero draws are resampled.
    pub fn uniform_open(&mut self) -> f64 {
        loop {
            let u = self.uniform();
            if u > 0.0 {
                return u;
            }
        }
    }

    pub fn uniform_range(&mut self, a: f64, b: f64) -> f64 {
        a + (b - a) * self.uniform()
    }

    /// Uniform integer in `0..k`. Panics if `k == 0`.
    pub fn choose(&mut self, k: usize) -> usize {
        assert!(k > 0, "choose from an empty range");
        self.inner.random_range(0..k)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_sequence() {
        let mut a = RngStream::new(42);
        let mut b = RngStream::new(42);
        for _ in 0..100 {
            assert_eq!(a.normal().to_bits(), b.normal().to_bits());
            assert_eq!(a.uniform().to_bits(), b.uniform().to_bits());
            assert_eq!(a.choose(7), b.choose(7));
        }
    }

    #[test]
    fn chain_seeds_differ() {
        assert_ne!(chain_seed(1, 0), chain_seed(1, 1));
        assert_ne!(chain_seed(1, 0), chain_seed(2, 0));
        assert_eq!(RngStream::for_chain(9, 3).seed(), chain_seed(9, 3));
    }

    #[test]
    fn uniform_range_bounds() {
        let mut r = RngStream::new(3);
        for _ in 0..1000 {
            let x = r.uniform_range(0.5, 2.0);
            assert!((0.5..2.0).contains(&x));
            let u = r.uniform_open();
            assert!(u > 0.0 && u < 1.0);
        }
    }

    #[test]
    fn normal_moments() {
        let mut r = RngStream::new(11);
        let n = 100_000;
        let xs: Vec<f64> = (0..n).map(|_| r.normal()).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 0.02);
        assert!((var - 1.0).abs() < 0.02);
    }
}
