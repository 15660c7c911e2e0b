//! Counter-based random streams.
//!
//! Every stream is a ChaCha12 generator keyed by `master_seed` and positioned on
//! the ChaCha stream `stream_id`, so two streams with equal `(master_seed,
//! stream_id)` are identical and distinct ids give disjoint keystreams. Parallel
//! sweeps hand each trial its own `stream_id` and never share a generator.
//!
//! Standard normals use the ziggurat sampler from `rand_distr`
//! (`StandardNormal`); the method is fixed so that sequences are reproducible
//! bit-for-bit for a given seed and lockfile.

use nalgebra::Complex;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

#[derive(Clone, Debug)]
pub struct RngStream {
    master_seed: u64,
    stream_id: u64,
    inner: ChaCha12Rng,
}

/// Creates the stream `(master_seed, stream_id)`.
pub fn rng_stream(master_seed: u64, stream_id: u64) -> RngStream {
    RngStream::new(master_seed, stream_id)
}

impl RngStream {
    pub fn new(master_seed: u64, stream_id: u64) -> Self {
        let mut inner = ChaCha12Rng::seed_from_u64(master_seed);
        inner.set_stream(stream_id);
        Self {
            master_seed,
            stream_id,
            inner,
        }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Draws a fresh master seed from this stream. Operations that fan out into
    /// per-trial streams call this once and then use `RngStream::new(base, t)`.
    pub fn derive_seed(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    pub fn normal(&mut self) -> f64 {
        self.inner.sample(StandardNormal)
    }

    /// Complex standard normal with `E|z|^2 = 1` (independent real and
    /// imaginary parts of variance 1/2).
    pub fn complex_normal(&mut self) -> Complex<f64> {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let re = self.normal() * s;
        let im = self.normal() * s;
        Complex::new(re, im)
    }

    /// Uniform index in `0..n`. Panics if `n == 0`.
    pub fn index(&mut self, n: usize) -> usize {
        self.inner.random_range(0..n)
    }

    /// Uniform sign in `{-1, +1}`.
    pub fn sign(&mut self) -> i8 {
        if self.inner.next_u32() & 1 == 0 {
            1
        } else {
            -1
        }
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
    fn equal_keys_give_equal_sequences() {
        let mut a = rng_stream(17, 0);
        let mut b = rng_stream(17, 0);
        for _ in 0..100 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn distinct_stream_ids_differ() {
        let mut a = rng_stream(17, 0);
        let mut b = rng_stream(17, 1);
        assert_ne!(a.next_u64(), b.next_u64());
    }

    #[test]
    fn normal_sample_mean_is_centered() {
        let mut s = rng_stream(2024, 0);
        let n = 1_000_000;
        let mean = (0..n).map(|_| s.normal()).sum::<f64>() / n as f64;
        // CLT: std of the mean is 1e-3, so 4e-3 is a four-sigma band.
        assert!(mean.abs() < 4e-3, "mean = {mean}");
    }

    #[test]
    fn complex_normal_has_unit_second_moment() {
        let mut s = rng_stream(5, 3);
        let n = 200_000;
        let m2 = (0..n).map(|_| s.complex_normal().norm_sqr()).sum::<f64>() / n as f64;
        assert!((m2 - 1.0).abs() < 0.01, "E|z|^2 = {m2}");
    }

    #[test]
    fn uniform_is_in_unit_interval() {
        let mut s = rng_stream(1, 1);
        for _ in 0..10_000 {
            let u = s.uniform();
            assert!((0.0..1.0).contains(&u));
        }
    }
}
