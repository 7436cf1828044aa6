use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::Matrix;

/// Name of the generator behind [`RngStream`], recorded in output metadata.
pub const RNG_ALGORITHM: &str =
    "ChaCha8 (rand_chacha 0.9), 64-bit seed as little-endian key, stream id via set_stream";

/// Seeded ChaCha8 stream. Equal `(seed, stream)` pairs yield equal draws.
///
/// Single-owner: parallel code derives one stream per task with [`RngStream::fork`].
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream: u64,
    inner: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&seed.to_le_bytes());
        let mut inner = ChaCha8Rng::from_seed(key);
        inner.set_stream(stream);
        RngStream {
            seed,
            stream,
            inner,
        }
    }

    /// Independent stream for a labelled sub-task, keyed by `(seed, stream, tag, index)`.
    pub fn fork(&self, tag: u32, index: u64) -> RngStream {
        RngStream::new(self.seed, mix(self.stream, ((tag as u64) << 40) ^ index))
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.random()
    }

    /// Uniform on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    pub fn normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.inner)
    }

    pub fn below(&mut self, n: usize) -> usize {
        self.inner.random_range(0..n)
    }

    pub fn normal_vec(&mut self, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.normal()).collect()
    }

    pub fn normal_matrix(&mut self, rows: usize, cols: usize) -> Matrix {
        Matrix::from_fn(rows, cols, |_, _| self.normal())
    }

    pub fn uniform_matrix(&mut self, rows: usize, cols: usize, bound: f64) -> Matrix {
        Matrix::from_fn(rows, cols, |_, _| self.uniform_in(-bound, bound))
    }

    /// Fisher-Yates shuffle driven by this stream.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }

    pub fn permutation(&mut self, n: usize) -> Vec<usize> {
        let mut p: Vec<usize> = (0..n).collect();
        self.shuffle(&mut p);
        p
    }
}

// splitmix64 finaliser over the combined words
fn mix(a: u64, b: u64) -> u64 {
    let mut z = a.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ b;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_seed_and_stream_give_equal_draws() {
        let mut a = RngStream::new(7, 3);
        let mut b = RngStream::new(7, 3);
        let xa: Vec<u64> = (0..64).map(|_| a.next_u64()).collect();
        let xb: Vec<u64> = (0..64).map(|_| b.next_u64()).collect();
        assert_eq!(xa, xb);
        let na: Vec<u64> = (0..64).map(|_| a.normal().to_bits()).collect();
        let nb: Vec<u64> = (0..64).map(|_| b.normal().to_bits()).collect();
        assert_eq!(na, nb);
    }

    #[test]
    fn streams_differ() {
        let mut a = RngStream::new(7, 3);
        let mut b = RngStream::new(7, 4);
        assert_ne!(a.next_u64(), b.next_u64());
        let r = RngStream::new(1, 0);
        assert_ne!(r.fork(1, 0).stream_id(), r.fork(1, 1).stream_id());
        assert_ne!(r.fork(1, 0).stream_id(), r.fork(2, 0).stream_id());
    }
}
