//! Counter-keyed random streams.
//!
//! Every trial of a simulation owns an [`RngStream`] identified by
//! `(seed, stream_id)`. The stream is a ChaCha8 keystream keyed by the seed
//! and positioned on the 64-bit stream selected by `stream_id`, so the same
//! key reproduces the same draws regardless of which worker evaluates it or
//! in which order.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::scalar::Real;

#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    inner: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream_id);
        Self {
            seed,
            stream_id,
            inner,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// A standard normal draw.
    #[inline]
    pub fn gaussian<T: Real>(&mut self) -> T {
        let z: f64 = self.inner.sample(StandardNormal);
        T::of(z)
    }

    /// Uniform index in `[0, n)`.
    #[inline]
    pub fn index(&mut self, n: usize) -> usize {
        self.inner.random_range(0..n)
    }

    /// Uniform draw in `[0, 1)`.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }
}

impl RngCore for RngStream {
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
    fn same_key_same_sequence() {
        let mut a = RngStream::new(7, 3);
        let mut b = RngStream::new(7, 3);
        for _ in 0..100 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn distinct_keys_diverge() {
        let draw = |s, id| {
            let mut r = RngStream::new(s, id);
            (0..8).map(|_| r.next_u64()).collect::<Vec<_>>()
        };
        assert_ne!(draw(7, 3), draw(7, 4));
        assert_ne!(draw(7, 3), draw(8, 3));
    }

    #[test]
    fn adjacent_streams_uncorrelated() {
        // sample correlation of paired normals from neighbouring stream ids
        let n = 20_000;
        let mut sxy = 0.0;
        let mut sxx = 0.0;
        let mut syy = 0.0;
        for id in 0..n {
            let x: f64 = RngStream::new(1, 2 * id).gaussian();
            let y: f64 = RngStream::new(1, 2 * id + 1).gaussian();
            sxy += x * y;
            sxx += x * x;
            syy += y * y;
        }
        let rho = sxy / (sxx * syy).sqrt();
        // 4 sigma of the null distribution (1/sqrt(n))
        assert!(rho.abs() < 4.0 / (n as f64).sqrt(), "rho = {rho}");
    }

    #[test]
    fn index_in_range() {
        let mut r = RngStream::new(0, 0);
        for _ in 0..1000 {
            assert!(r.index(8) < 8);
        }
    }
}
