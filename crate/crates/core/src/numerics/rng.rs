use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::error::{Error, Result};

/// Deterministic random stream, splittable into labelled substreams.
///
/// A substream's seed is `seed ^ fnv1a(label)`, so draws made by one module
/// never shift the draws seen by another.
#[derive(Clone, Debug)]
pub struct SeededRng {
    seed: u64,
    inner: ChaCha8Rng,
    spare_normal: Option<f64>,
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes
        .iter()
        .fold(FNV_OFFSET, |h, &b| (h ^ b as u64).wrapping_mul(FNV_PRIME))
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        SeededRng {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
            spare_normal: None,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Independent substream keyed by `label`; does not advance `self`.
    pub fn split(&self, label: &str) -> SeededRng {
        SeededRng::new(self.seed ^ fnv1a(label.as_bytes()))
    }

    /// Substream keyed by `label` and an index, e.g. one per permutation.
    pub fn split_indexed(&self, label: &str, index: u64) -> SeededRng {
        let mut bytes = label.as_bytes().to_vec();
        bytes.push(0);
        bytes.extend_from_slice(&index.to_le_bytes());
        SeededRng::new(self.seed ^ fnv1a(&bytes))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform draw in `[0, 1)` with 53 bits of precision.
    pub fn uniform(&mut self) -> f64 {
        (self.inner.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `[0, n)`, unbiased.
    pub fn below(&mut self, n: usize) -> usize {
        assert!(n > 0, "below(0)");
        let n = n as u64;
        let zone = u64::MAX - (u64::MAX % n);
        loop {
            let v = self.inner.next_u64();
            if v < zone {
                return (v % n) as usize;
            }
        }
    }

    /// Standard normal deviate via Box–Muller, caching the second deviate.
    pub fn standard_normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        let u1 = loop {
            let u = self.uniform();
            if u > 0.0 {
                break u;
            }
        };
        let u2 = self.uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = std::f64::consts::TAU * u2;
        self.spare_normal = Some(r * theta.sin());
        r * theta.cos()
    }

    /// Draw from N(mean, sd²). `sd = 0` returns `mean` exactly.
    pub fn gauss(&mut self, mean: f64, sd: f64) -> Result<f64> {
        if !(sd >= 0.0) || !sd.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "standard deviation must be finite and non-negative, got {sd}"
            )));
        }
        if sd == 0.0 {
            return Ok(mean);
        }
        Ok(mean + sd * self.standard_normal())
    }

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
    fn degenerate_sd_returns_mean() {
        let mut rng = SeededRng::new(3);
        assert_eq!(rng.gauss(7.0, 0.0).unwrap(), 7.0);
    }

    #[test]
    fn negative_sd_rejected() {
        let mut rng = SeededRng::new(3);
        assert!(rng.gauss(0.0, -1.0).is_err());
        assert!(rng.gauss(0.0, f64::NAN).is_err());
    }

    #[test]
    fn moments_match() {
        let mut rng = SeededRng::new(2024);
        let n = 100_000;
        let xs: Vec<f64> = (0..n).map(|_| rng.gauss(0.0, 1.0).unwrap()).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!(mean.abs() < 0.02, "mean {mean}");
        assert!((var.sqrt() - 1.0).abs() < 0.02, "sd {}", var.sqrt());
    }

    #[test]
    fn same_seed_same_stream() {
        let mut a = SeededRng::new(99);
        let mut b = SeededRng::new(99);
        for _ in 0..50 {
            assert_eq!(
                a.gauss(1.0, 2.0).unwrap().to_bits(),
                b.gauss(1.0, 2.0).unwrap().to_bits()
            );
        }
    }

    #[test]
    fn split_is_order_independent() {
        let root = SeededRng::new(5);
        let mut consumed = root.clone();
        for _ in 0..10 {
            consumed.next_u64();
        }
        let mut a = root.split("graph");
        let mut b = consumed.split("graph");
        assert_eq!(a.next_u64(), b.next_u64());
        let mut c = root.split("noise");
        assert_ne!(root.split("graph").next_u64(), c.next_u64());
        assert_ne!(
            root.split_indexed("perm", 0).next_u64(),
            root.split_indexed("perm", 1).next_u64()
        );
    }

    #[test]
    fn below_stays_in_range() {
        let mut rng = SeededRng::new(1);
        let mut seen = [0usize; 5];
        for _ in 0..5000 {
            seen[rng.below(5)] += 1;
        }
        assert!(seen.iter().all(|&c| c > 800));
    }
}
