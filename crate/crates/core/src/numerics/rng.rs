use rand::{Rng as _, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Experiment-level seed. Every random consumer derives its own labelled
/// substream, so adding a consumer never shifts another one's draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngState {
    pub seed: u64,
}

impl RngState {
    pub fn new(seed: u64) -> Self {
        RngState { seed }
    }

    pub fn stream(&self, label: &str) -> Rng {
        Rng::new(self.seed, label)
    }
}

/// ChaCha8 stream keyed by SHA-256(seed ‖ label).
#[derive(Debug, Clone)]
pub struct Rng {
    inner: ChaCha8Rng,
}

impl Rng {
    pub fn new(seed: u64, label: &str) -> Self {
        let mut h = Sha256::new();
        h.update(seed.to_le_bytes());
        h.update(label.as_bytes());
        let key: [u8; 32] = h.finalize().into();
        Rng {
            inner: ChaCha8Rng::from_seed(key),
        }
    }

    /// Uniform in [0, 1).
    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    pub fn gaussian(&mut self) -> f64 {
        self.inner.sample(StandardNormal)
    }

    /// Uniform integer in [0, n).
    pub fn below(&mut self, n: usize) -> usize {
        self.inner.random_range(0..n)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Fisher–Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_label_is_identical() {
        let mut a = Rng::new(42, "init/branch2/conv1");
        let mut b = RngState::new(42).stream("init/branch2/conv1");
        for _ in 0..1000 {
            assert_eq!(a.uniform().to_bits(), b.uniform().to_bits());
        }
    }

    #[test]
    fn frozen_first_draws() {
        // Regression guard for cross-platform reproducibility.
        let mut r = Rng::new(7, "frozen");
        let got: Vec<u64> = (0..3).map(|_| r.next_u64()).collect();
        assert_eq!(got, [2997607992687756255, 9701209559163678241, 1631542318131946114]);
    }

    #[test]
    fn labelled_streams_are_uncorrelated() {
        let mut a = Rng::new(1, "a");
        let mut b = Rng::new(1, "b");
        let n = 10_000;
        let xs: Vec<f64> = (0..n).map(|_| a.uniform()).collect();
        let ys: Vec<f64> = (0..n).map(|_| b.uniform()).collect();
        let mx = xs.iter().sum::<f64>() / n as f64;
        let my = ys.iter().sum::<f64>() / n as f64;
        let cov: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let vx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
        let vy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
        let r = cov / (vx * vy).sqrt();
        assert!(r.abs() < 0.05, "r = {r}");
    }

    #[test]
    fn gaussian_mean_near_zero() {
        let mut r = Rng::new(5, "gauss");
        let n = 100_000;
        let m = (0..n).map(|_| r.gaussian()).sum::<f64>() / n as f64;
        assert!(m.abs() < 0.02, "mean {m}");
    }

    #[test]
    fn shuffle_is_a_permutation() {
        let mut r = Rng::new(9, "shuffle");
        let mut v: Vec<usize> = (0..100).collect();
        r.shuffle(&mut v);
        let mut s = v.clone();
        s.sort_unstable();
        assert_eq!(s, (0..100).collect::<Vec<_>>());
        assert_ne!(v, s);
    }
}
