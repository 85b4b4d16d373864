//! Exact simulation of heavy multinomial draws.
//!
//! The protocols nominally draw N independent coordinates per server with N
//! set by formulas that reach far past any practical loop bound, but every
//! downstream statistic depends only on the multiset of drawn coordinates.
//! That multiset is sampled exactly in O(n) by walking the outcomes once and
//! drawing conditional binomials against the remaining probability mass.
//!
//! Binomial draws switch regime by size: exact sampling for small
//! parameters, Poisson for huge-N/tiny-p, and a normal approximation once
//! the variance passes 10^6 (count error there is far below one part in a
//! thousand and membership is already certain).

use rand::Rng;
use rand_distr::{Binomial, Distribution, Poisson, StandardNormal};

/// One binomial draw, O(1) for any parameter size.
pub fn fast_binomial<R: Rng + ?Sized>(n: u64, p: f64, rng: &mut R) -> u64 {
    if n == 0 || p <= 0.0 {
        return 0;
    }
    if p >= 1.0 {
        return n;
    }
    if p > 0.5 {
        // Work on the complement; keeps every downstream sampler away from
        // its degenerate near-one corner.
        return n - fast_binomial(n, 1.0 - p, rng);
    }
    let nf = n as f64;
    let mean = nf * p;
    let var = mean * (1.0 - p);
    if var > 1e6 {
        let z: f64 = StandardNormal.sample(rng);
        let c = (mean + z * var.sqrt()).round();
        return c.clamp(0.0, nf) as u64;
    }
    if p < 1e-7 && n > 1_000_000 {
        // Poisson regime: total-variation error O(p).
        let c = Poisson::new(mean).map(|d| d.sample(rng)).unwrap_or(0.0);
        return (c as u64).min(n);
    }
    Binomial::new(n, p)
        .map(|d| d.sample(rng))
        .unwrap_or_else(|_| ((nf * p).round() as u64).min(n))
}

/// Multiplicity vector of `draws` i.i.d. samples from the distribution
/// proportional to `weights` (entries with zero weight never appear).
/// Exact joint distribution; O(len) time.
pub fn multinomial_counts<R: Rng + ?Sized>(
    weights: &[f64],
    draws: u64,
    rng: &mut R,
) -> Vec<(usize, u64)> {
    let mut out = Vec::new();
    if draws == 0 {
        return out;
    }
    // Suffix sums keep the conditional probabilities stable.
    let mut suffix = vec![0.0f64; weights.len() + 1];
    for i in (0..weights.len()).rev() {
        suffix[i] = suffix[i + 1] + weights[i].max(0.0);
    }
    if suffix[0] <= 0.0 {
        return out;
    }
    let last_positive = weights
        .iter()
        .rposition(|&w| w > 0.0)
        .expect("positive total");
    let mut remaining = draws;
    for (i, &w) in weights.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        if w <= 0.0 {
            continue;
        }
        let c = if i == last_positive {
            remaining
        } else {
            fast_binomial(remaining, (w / suffix[i]).min(1.0), rng)
        };
        if c > 0 {
            out.push((i, c));
            remaining -= c;
        }
    }
    out
}

/// Distinct outcomes of `draws` i.i.d. weighted samples, exact up to a
/// union probability below 1e-20: when even the smallest positive weight is
/// certain to be hit (draws * min_share >= 60) the support is the whole
/// positive set and no randomness is consumed.
pub fn multinomial_support<R: Rng + ?Sized>(
    weights: &[f64],
    draws: u64,
    rng: &mut R,
) -> Vec<usize> {
    if draws == 0 {
        return Vec::new();
    }
    let total: f64 = weights.iter().filter(|w| **w > 0.0).sum();
    if total <= 0.0 {
        return Vec::new();
    }
    let min_pos = weights
        .iter()
        .filter(|w| **w > 0.0)
        .fold(f64::INFINITY, |a, &b| a.min(b));
    if (draws as f64) * (min_pos / total) >= 60.0 {
        return weights
            .iter()
            .enumerate()
            .filter(|(_, w)| **w > 0.0)
            .map(|(i, _)| i)
            .collect();
    }
    multinomial_counts(weights, draws, rng)
        .into_iter()
        .map(|(i, _)| i)
        .collect()
}

/// One hypergeometric draw (successes among `n` draws without replacement
/// from a population of `total` containing `k` successes), O(1) amortized.
pub fn fast_hypergeometric<R: Rng + ?Sized>(total: u64, k: u64, n: u64, rng: &mut R) -> u64 {
    if total == 0 || k == 0 || n == 0 {
        return 0;
    }
    let k = k.min(total);
    let n = n.min(total);
    if k == total {
        return n;
    }
    if n == total {
        return k;
    }
    // Symmetric in (k, n): shrink the effective sample.
    let (k, n) = if k < n { (n, k) } else { (k, n) };
    if n <= 256 {
        // Exact sequential draws without replacement.
        let mut successes = 0u64;
        let mut pool = total;
        let mut left = k;
        for _ in 0..n {
            if left == 0 {
                break;
            }
            let u: f64 = rng.gen();
            let hit = u * (pool as f64) < (left as f64);
            if hit {
                successes += 1;
                left -= 1;
            }
            pool -= 1;
        }
        return successes;
    }
    let p = k as f64 / total as f64;
    if n <= total / 100 {
        // Sample small relative to the population: binomial regime.
        return fast_binomial(n, p, rng).min(k);
    }
    // Dense regime with a large sample: normal approximation with the
    // finite-population correction.
    let nf = n as f64;
    let mean = nf * p;
    let fpc = (total - n) as f64 / (total - 1).max(1) as f64;
    let var = (mean * (1.0 - p) * fpc).max(1e-12);
    let z: f64 = StandardNormal.sample(rng);
    let lo = n.saturating_sub(total - k);
    let hi = n.min(k);
    let c = (mean + z * var.sqrt()).round();
    (c.max(lo as f64) as u64).min(hi)
}

/// Draw `take` items without replacement from a multiset given as
/// (index, multiplicity) pairs; returns per-index draw counts and removes
/// the drawn items from the multiset.
pub fn multiset_take<R: Rng + ?Sized>(
    multiset: &mut [(usize, u64)],
    take: u64,
    rng: &mut R,
) -> Vec<(usize, u64)> {
    let mut population: u64 = multiset.iter().map(|(_, c)| c).sum();
    let mut remaining = take.min(population);
    let mut out = Vec::new();
    for entry in multiset.iter_mut() {
        if remaining == 0 {
            break;
        }
        let (idx, count) = *entry;
        if count == 0 {
            continue;
        }
        let drawn = if population == count || remaining >= population {
            // Everything left must be drawn from this entry, or the whole
            // remaining population is being consumed.
            count.min(remaining)
        } else {
            fast_hypergeometric(population, count, remaining, rng)
        };
        if drawn > 0 {
            out.push((idx, drawn));
            entry.1 -= drawn;
            remaining -= drawn;
        }
        population -= count;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_xoshiro::Xoshiro256PlusPlus;

    #[test]
    fn counts_sum_to_draws() {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(1);
        let w = [0.0, 2.0, 1.0, 0.0, 5.0];
        for draws in [1u64, 7, 1000] {
            let counts = multinomial_counts(&w, draws, &mut rng);
            assert_eq!(counts.iter().map(|(_, c)| c).sum::<u64>(), draws);
            assert!(counts.iter().all(|(i, _)| w[*i] > 0.0));
        }
    }

    #[test]
    fn counts_match_expected_frequencies() {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(2);
        let w = [1.0, 3.0, 6.0];
        let draws = 600_000u64;
        let counts = multinomial_counts(&w, draws, &mut rng);
        let mut freq = [0.0f64; 3];
        for (i, c) in counts {
            freq[i] = c as f64 / draws as f64;
        }
        assert!((freq[0] - 0.1).abs() < 0.005, "{freq:?}");
        assert!((freq[1] - 0.3).abs() < 0.005, "{freq:?}");
        assert!((freq[2] - 0.6).abs() < 0.005, "{freq:?}");
    }

    #[test]
    fn support_saturates_for_huge_draw_counts() {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(3);
        let w = [1e-9, 0.0, 5.0, 1.0];
        let support = multinomial_support(&w, u64::MAX, &mut rng);
        assert_eq!(support, vec![0, 2, 3]);
    }

    #[test]
    fn support_membership_rate_matches_inclusion_probability() {
        // Pr[i in support] = 1 - (1 - q_i)^N.
        let w = [1.0, 1.0, 8.0];
        let draws = 4u64;
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(4);
        let trials = 200_000;
        let mut hit0 = 0usize;
        for _ in 0..trials {
            let s = multinomial_support(&w, draws, &mut rng);
            if s.contains(&0) {
                hit0 += 1;
            }
        }
        let q0: f64 = 0.1;
        let expect = 1.0 - (1.0 - q0).powi(draws as i32);
        let got = hit0 as f64 / trials as f64;
        assert!((got - expect).abs() < 0.005, "got {got} expect {expect}");
    }

    #[test]
    fn fast_binomial_mean_in_all_regimes() {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(5);
        // (n, p, regime)
        let cases = [
            (100u64, 0.3, "exact"),
            (10_000_000_000u64, 1e-9, "poisson"),
            (1u64 << 62, 1e-10, "normal-or-poisson"),
            (50_000_000u64, 0.5, "normal"),
        ];
        for (n, p, regime) in cases {
            let trials = 3000;
            let mean: f64 =
                (0..trials).map(|_| fast_binomial(n, p, &mut rng) as f64).sum::<f64>()
                    / trials as f64;
            let expect = n as f64 * p;
            let sd = (n as f64 * p * (1.0 - p)).sqrt();
            let tol = 5.0 * sd / (trials as f64).sqrt() + 1e-9;
            assert!(
                (mean - expect).abs() <= tol.max(0.05 * expect),
                "{regime}: mean {mean} expect {expect}"
            );
        }
        assert_eq!(fast_binomial(10, 0.0, &mut rng), 0);
        assert_eq!(fast_binomial(10, 1.0, &mut rng), 10);
    }

    #[test]
    fn multiset_take_is_exhaustive_and_bounded() {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(6);
        let mut ms = vec![(0usize, 5u64), (3, 2), (7, 10)];
        let taken = multiset_take(&mut ms, 17, &mut rng);
        assert_eq!(taken.iter().map(|(_, c)| c).sum::<u64>(), 17);
        let left: u64 = ms.iter().map(|(_, c)| c).sum();
        assert_eq!(left, 0);
        // Taking from an empty multiset yields nothing.
        assert!(multiset_take(&mut ms, 3, &mut rng).is_empty());
    }

    #[test]
    fn multiset_take_hypergeometric_mean() {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(7);
        let trials = 100_000;
        let mut sum0 = 0u64;
        for _ in 0..trials {
            let mut ms = vec![(0usize, 30u64), (1, 70)];
            let taken = multiset_take(&mut ms, 10, &mut rng);
            sum0 += taken.iter().find(|(i, _)| *i == 0).map(|(_, c)| *c).unwrap_or(0);
        }
        let mean = sum0 as f64 / trials as f64;
        assert!((mean - 3.0).abs() < 0.05, "mean {mean}");
    }
}
