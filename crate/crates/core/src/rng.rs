//! Seedable, platform-independent random streams.
//!
//! Every stream is ChaCha8 keyed by `seed_from_u64(seed)` with the ChaCha
//! stream id set to a caller-chosen 64-bit value, so `(seed, stream)` fixes
//! the output sequence on every platform.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Stream namespaces. The top byte of the stream id selects the purpose.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u8)]
pub enum Domain {
    Chain = 1,
    Disturb = 2,
    Estimate = 3,
    Generator = 4,
    Sample = 5,
}

#[derive(Clone, Debug)]
pub struct Rng {
    inner: ChaCha8Rng,
    stream: u64,
}

impl Rng {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Rng { inner, stream }
    }

    /// Stream for `(domain, major, minor)`; `major` and `minor` keep 28 bits each.
    pub fn derive(seed: u64, domain: Domain, major: u64, minor: u64) -> Self {
        let stream =
            ((domain as u64) << 56) | ((major & 0x0fff_ffff) << 28) | (minor & 0x0fff_ffff);
        Rng::new(seed, stream)
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// Uniform on `[0, 1)` with 53 bits of precision.
    pub fn unit(&mut self) -> f64 {
        (self.inner.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform on `[lo, hi]`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.unit()
    }

    /// Uniform index in `0..n` (`n ≥ 1`), without modulo bias.
    pub fn index(&mut self, n: usize) -> usize {
        let n = n as u64;
        let zone = u64::MAX - (u64::MAX % n);
        loop {
            let v = self.inner.next_u64();
            if v < zone {
                return (v % n) as usize;
            }
        }
    }

    /// Uniform integer in `lo..=hi`.
    pub fn int_in(&mut self, lo: i64, hi: i64) -> i64 {
        lo + self.index((hi - lo + 1) as usize) as i64
    }
}

impl RngCore for Rng {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_and_stream_repeat() {
        let mut a = Rng::new(42, 7);
        let mut b = Rng::new(42, 7);
        for _ in 0..100 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn streams_differ() {
        let mut a = Rng::new(42, 7);
        let mut b = Rng::new(42, 8);
        let same = (0..16).filter(|_| a.next_u64() == b.next_u64()).count();
        assert!(same < 2);
    }

    #[test]
    fn golden_prefix() {
        // Changing these breaks reproducibility of every recorded run.
        let mut r = Rng::new(1, 0);
        let got: Vec<u64> = (0..3).map(|_| r.next_u64()).collect();
        assert_eq!(
            got,
            [
                7424550030962593201,
                1482817706323250795,
                11004592982271133285
            ]
        );
    }

    #[test]
    fn ranges() {
        let mut r = Rng::new(3, 3);
        for _ in 0..10_000 {
            let u = r.unit();
            assert!((0.0..1.0).contains(&u));
            let k = r.int_in(-10, 10);
            assert!((-10..=10).contains(&k));
            assert!(r.index(7) < 7);
        }
    }
}
