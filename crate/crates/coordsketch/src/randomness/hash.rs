//! Shared uniform key hashes.
//!
//! `uniform_hash(key, salt, index)` realizes a family of independent hash
//! functions h_1, h_2, ... mapping opaque keys to [0, 1); all parties with
//! the same salt agree on every hash value, which is what makes the
//! hash-filtered sketch samples composable across servers.

use super::prf::{prf_bytes, unit_half_open};

/// Deterministic hash of an opaque key into [0, 1) with 53-bit resolution.
pub fn uniform_hash(key: &[u8], salt: u64, index: u64) -> f64 {
    unit_half_open(prf_bytes(key, salt, index))
}

/// One member h_index of the shared hash family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KeyHash {
    pub salt: u64,
    pub index: u64,
}

impl KeyHash {
    pub fn new(salt: u64, index: u64) -> Self {
        Self { salt, index }
    }

    pub fn at(&self, key: &[u8]) -> f64 {
        uniform_hash(key, self.salt, self.index)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_in_range() {
        let h = uniform_hash(b"row-17", 99, 2);
        assert_eq!(h, uniform_hash(b"row-17", 99, 2));
        assert!((0.0..1.0).contains(&h));
        assert_ne!(h, uniform_hash(b"row-17", 99, 3));
        assert_ne!(h, uniform_hash(b"row-17", 98, 2));
    }

    #[test]
    fn ks_distance_from_uniform() {
        let n = 100_000usize;
        let mut vals: Vec<f64> = (0..n)
            .map(|i| uniform_hash(format!("key-{i}").as_bytes(), 7, 0))
            .collect();
        vals.sort_by(|a, b| a.total_cmp(b));
        let mut ks: f64 = 0.0;
        for (i, v) in vals.iter().enumerate() {
            let lo = i as f64 / n as f64;
            let hi = (i + 1) as f64 / n as f64;
            ks = ks.max((v - lo).abs()).max((v - hi).abs());
        }
        assert!(ks <= 0.01, "KS distance {ks}");
    }

    #[test]
    fn chi_square_uniformity_across_indices() {
        // 256 bins over 10^5 keys; statistic should stay below the p = 0.01
        // critical value for 255 degrees of freedom (~310.5).
        let n = 100_000usize;
        let bins = 256usize;
        for index in 0..4u64 {
            let mut counts = vec![0u64; bins];
            for i in 0..n {
                let v = uniform_hash(format!("k{i}").as_bytes(), 1234, index);
                counts[(v * bins as f64) as usize] += 1;
            }
            let expect = n as f64 / bins as f64;
            let stat: f64 = counts
                .iter()
                .map(|&c| {
                    let d = c as f64 - expect;
                    d * d / expect
                })
                .sum();
            assert!(stat < 310.5, "chi-square {stat} for index {index}");
        }
    }

    #[test]
    fn cross_index_correlation_is_negligible() {
        let n = 100_000usize;
        let (mut sx, mut sy, mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for i in 0..n {
            let key = format!("corr-{i}");
            let x = uniform_hash(key.as_bytes(), 5, 1);
            let y = uniform_hash(key.as_bytes(), 5, 2);
            sx += x;
            sy += y;
            sxx += x * x;
            syy += y * y;
            sxy += x * y;
        }
        let nf = n as f64;
        let cov = sxy / nf - (sx / nf) * (sy / nf);
        let vx = sxx / nf - (sx / nf) * (sx / nf);
        let vy = syy / nf - (sy / nf) * (sy / nf);
        let rho = cov / (vx * vy).sqrt();
        assert!(rho.abs() <= 0.02, "correlation {rho}");
    }
}
