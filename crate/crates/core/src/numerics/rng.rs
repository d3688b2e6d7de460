//! Seeded random streams.
//!
//! Each [`Rng`] wraps a ChaCha8 generator, whose output is a pure function of
//! its key and block counter. Child streams are derived from the parent's key
//! and a label or index, never from its position, so any stream can be
//! recreated without replaying the draws that came before it.

use rand::{Rng as _, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::numerics::Tensor;

/// Label and index children live in disjoint halves of the stream-id space.
const LABEL_STREAM: u64 = 1 << 63;

fn fnv1a(label: &[u8]) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325_u64;
    for &b in label {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Rng {
    inner: ChaCha8Rng,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Self {
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Key of a child stream: the first 32 bytes of this stream's key run on stream `id`.
    fn child(&self, id: u64) -> Rng {
        let mut keyed = ChaCha8Rng::from_seed(self.inner.get_seed());
        keyed.set_stream(id);
        let mut seed = [0u8; 32];
        keyed.fill_bytes(&mut seed);
        Rng {
            inner: ChaCha8Rng::from_seed(seed),
        }
    }

    /// Derives an independent stream keyed by `label`. The parent is not advanced.
    pub fn split(&self, label: &str) -> Rng {
        self.child(fnv1a(label.as_bytes()) | LABEL_STREAM)
    }

    /// Derives an independent stream keyed by an integer, e.g. a sample index.
    pub fn split_index(&self, index: u64) -> Rng {
        self.child(index & !LABEL_STREAM)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform in `[0, 1)`.
    pub fn uniform(&mut self) -> f32 {
        self.inner.random()
    }

    /// Uniform in `[lo, hi)`.
    pub fn uniform_range(&mut self, lo: f32, hi: f32) -> f32 {
        lo + (hi - lo) * self.uniform()
    }

    /// Uniform integer in `[0, n)`. Panics when `n == 0`.
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0, "below(0)");
        self.inner.random_range(0..n)
    }

    /// Uniform integer in `[lo, hi]`.
    pub fn range_inclusive(&mut self, lo: i64, hi: i64) -> i64 {
        self.inner.random_range(lo..=hi)
    }

    pub fn bernoulli(&mut self, p: f32) -> bool {
        self.uniform() < p
    }

    pub fn normal(&mut self) -> f32 {
        self.inner.sample(StandardNormal)
    }

    pub fn fill_normal(&mut self, out: &mut [f32]) {
        for v in out {
            *v = self.normal();
        }
    }
}

/// Standard-normal tensor.
pub fn randn(rng: &mut Rng, shape: &[usize]) -> Result<Tensor> {
    if shape.is_empty() || shape.contains(&0) {
        return Err(Error::EmptyShape);
    }
    let n: usize = shape.iter().product();
    let mut data = vec![0.0; n];
    rng.fill_normal(&mut data);
    Tensor::new(shape.to_vec(), data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_stream() {
        let a = randn(&mut Rng::new(7), &[4]).unwrap();
        let b = randn(&mut Rng::new(7), &[4]).unwrap();
        assert_eq!(a.data(), b.data());
        // A cloned generator continues identically.
        let mut rng = Rng::new(7);
        randn(&mut rng, &[5]).unwrap();
        let mut resumed = rng.clone();
        assert_eq!(rng.next_u64(), resumed.next_u64());
    }

    #[test]
    fn split_ignores_parent_position() {
        let root = Rng::new(3);
        let mut advanced = root.clone();
        advanced.next_u64();
        assert_eq!(advanced.split("x"), root.split("x"));
        assert_ne!(root.split("x").split("x"), root.split("x"));
    }

    #[test]
    fn empty_shape_rejected() {
        let err = randn(&mut Rng::new(1), &[0]).unwrap_err();
        assert_eq!(err.to_string(), "empty shape");
        assert!(randn(&mut Rng::new(1), &[]).is_err());
        assert!(randn(&mut Rng::new(1), &[3, 0, 2]).is_err());
    }

    #[test]
    fn normal_moments() {
        let t = randn(&mut Rng::new(7), &[100_000]).unwrap();
        // Independent two-pass statistics in f64.
        let n = t.numel() as f64;
        let mean = t.data().iter().map(|&v| f64::from(v)).sum::<f64>() / n;
        let var = t
            .data()
            .iter()
            .map(|&v| (f64::from(v) - mean).powi(2))
            .sum::<f64>()
            / (n - 1.0);
        assert!(mean.abs() <= 0.02, "mean {mean}");
        assert!((0.97..=1.03).contains(&var), "var {var}");
    }

    #[test]
    fn splits_differ_from_parent_and_each_other() {
        let root = Rng::new(42);
        let mut a = root.split("a");
        let mut b = root.split("b");
        let mut i0 = root.split_index(0);
        let mut p = root.clone();
        let xs: Vec<u64> = vec![a.next_u64(), b.next_u64(), i0.next_u64(), p.next_u64()];
        for i in 0..xs.len() {
            for j in i + 1..xs.len() {
                assert_ne!(xs[i], xs[j]);
            }
        }
        assert_eq!(root.split("a"), root.split("a"));
    }

    #[test]
    fn split_streams_uncorrelated() {
        let root = Rng::new(3);
        let a = randn(&mut root.split_index(0), &[20_000]).unwrap();
        let b = randn(&mut root.split_index(1), &[20_000]).unwrap();
        let c = randn(&mut root.clone(), &[20_000]).unwrap();
        let corr = |x: &[f32], y: &[f32]| {
            let n = x.len() as f64;
            x.iter().zip(y).map(|(&p, &q)| f64::from(p) * f64::from(q)).sum::<f64>() / n
        };
        // 4.5 standard errors for n = 20000.
        assert!(corr(a.data(), b.data()).abs() < 0.032);
        assert!(corr(a.data(), c.data()).abs() < 0.032);
    }

    #[test]
    fn below_is_in_range() {
        let mut rng = Rng::new(9);
        let mut seen = [false; 7];
        for _ in 0..1000 {
            let v = rng.below(7) as usize;
            seen[v] = true;
        }
        assert!(seen.iter().all(|&s| s));
        for _ in 0..1000 {
            let v = rng.range_inclusive(-3, 3);
            assert!((-3..=3).contains(&v));
        }
    }
}
