//! Deterministic parallel Monte-Carlo plumbing.
//!
//! Work is split into fixed-size blocks; block `b` draws from an independent
//! ChaCha substream derived from (seed, b), and per-block results are folded
//! in block order. Results are therefore bit-identical for any worker count,
//! including one.

use num_complex::Complex64;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;

/// Shots per RNG block. Part of the reproducibility contract: changing it
/// changes the sample stream.
pub const BLOCK_SIZE: u64 = 4096;

/// RNG substream for one block of a run.
pub fn block_rng(seed: u64, block: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(block.wrapping_add(1));
    rng
}

/// Number of blocks covering `n` shots.
pub fn n_blocks(n: u64) -> u64 {
    n.div_ceil(BLOCK_SIZE)
}

/// Shots in block `b` of an `n`-shot run.
pub fn block_len(n: u64, b: u64) -> u64 {
    let start = b * BLOCK_SIZE;
    BLOCK_SIZE.min(n - start)
}

/// Map every block in parallel, returning the per-block results in block
/// order. `f` receives (block index, shots in block).
pub fn map_blocks<T, F>(n: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64, u64) -> T + Sync,
{
    (0..n_blocks(n))
        .into_par_iter()
        .map(|b| f(b, block_len(n, b)))
        .collect()
}

/// Running sums for a vector-valued complex kernel: per-element mean and
/// standard error of the mean, mergeable across blocks.
#[derive(Debug, Clone)]
pub struct KernelAccumulator {
    pub n: u64,
    pub sum: Vec<Complex64>,
    pub sq_re: Vec<f64>,
    pub sq_im: Vec<f64>,
}

impl KernelAccumulator {
    pub fn new(len: usize) -> Self {
        KernelAccumulator {
            n: 0,
            sum: vec![Complex64::new(0.0, 0.0); len],
            sq_re: vec![0.0; len],
            sq_im: vec![0.0; len],
        }
    }

    pub fn len(&self) -> usize {
        self.sum.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sum.is_empty()
    }

    /// Add one sample of the kernel vector.
    pub fn push_sample(&mut self, values: &[Complex64]) {
        debug_assert_eq!(values.len(), self.sum.len());
        self.n += 1;
        for (i, v) in values.iter().enumerate() {
            self.sum[i] += v;
            self.sq_re[i] += v.re * v.re;
            self.sq_im[i] += v.im * v.im;
        }
    }

    /// Merge another accumulator into this one (associative, commutative up
    /// to float rounding; callers merge in block order for determinism).
    pub fn merge(&mut self, other: &KernelAccumulator) {
        debug_assert_eq!(self.sum.len(), other.sum.len());
        self.n += other.n;
        for i in 0..self.sum.len() {
            self.sum[i] += other.sum[i];
            self.sq_re[i] += other.sq_re[i];
            self.sq_im[i] += other.sq_im[i];
        }
    }

    pub fn mean(&self, i: usize) -> Complex64 {
        self.sum[i] / self.n as f64
    }

    /// Standard error of the mean, combining real and imaginary spread:
    /// sqrt((var_re + var_im)/n).
    pub fn std_error(&self, i: usize) -> f64 {
        if self.n < 2 {
            return f64::INFINITY;
        }
        let n = self.n as f64;
        let mean = self.mean(i);
        let var_re = ((self.sq_re[i] / n - mean.re * mean.re) * n / (n - 1.0)).max(0.0);
        let var_im = ((self.sq_im[i] / n - mean.im * mean.im) * n / (n - 1.0)).max(0.0);
        ((var_re + var_im) / n).sqrt()
    }
}
