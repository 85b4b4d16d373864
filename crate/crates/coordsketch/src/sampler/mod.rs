//! One-round sampling from additively-defined distributions with in-round
//! probability estimation.
//!
//! Each server holds a nonnegative vector p(j) and the coordinator wants a
//! coordinate distributed proportionally to q_i = sum_j p_i(j), together
//! with an estimate of the realized probability, in a single round. Shared
//! exponential variates make the target coordinate an l1 heavy hitter of
//! the rescaled aggregate, so the coordinator can recognize it among the
//! servers' samples; a count-comparison guard detects the rare seeds where
//! the heavy hitter is ambiguous and reports an explicit Fail instead of a
//! silently wrong sample.

pub mod weighted;

use crate::comm::{CommError, CommStats, CoordinatorNet, ServerCtx, ServerReply, ServerVector};
use crate::randomness::{derive_seed, ExpStream};
use crate::sketch::sensitivity::{l2_leverage_scores, SensitivityError};
use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;
use std::collections::BTreeMap;
use thiserror::Error;
use weighted::{multinomial_counts, multiset_take};

#[derive(Debug, Error, PartialEq)]
pub enum SampleError {
    #[error("accuracy eps must lie in (0, 1/4), got {0}")]
    BadEps(f64),
    #[error(transparent)]
    Comm(#[from] CommError),
    #[error("tag {tag} maps to different rows on different servers")]
    TagConflict { tag: u64 },
    #[error("tagged matrices must share a column count: {0} vs {1}")]
    ColumnMismatch(usize, usize),
    #[error(transparent)]
    Sensitivity(#[from] SensitivityError),
    #[error("sampler failed after {attempts} attempts: {last:?}")]
    Exhausted { attempts: u32, last: FailReason },
}

/// Which abort condition fired.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FailReason {
    /// Top count below S / (2 C ln^2 n): no heavy hitter emerged.
    MaxTooSmall,
    /// Top two counts within the (1 + eps/2) guard: ambiguous argmax.
    TopTwoClose,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SampleOutcome {
    Ok { i_hat: usize, q_hat: f64 },
    Fail(FailReason),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleResult {
    pub outcome: SampleOutcome,
}

/// Tuning knobs; the defaults mirror the analysis constants.
#[derive(Debug, Clone)]
pub struct SamplerConfig {
    pub eps: f64,
    /// Heavy-hitter constant C.
    pub heavy_c: f64,
    /// Multiplier on the S = eps^-2 ln^5 n per-half sample count.
    pub sample_const: f64,
    pub precision_bits: u32,
    /// Retry budget for Fail outcomes at call sites.
    pub max_retries: u32,
}

impl SamplerConfig {
    pub fn new(eps: f64) -> Result<Self, SampleError> {
        if !(eps > 0.0 && eps < 0.25) {
            return Err(SampleError::BadEps(eps));
        }
        Ok(Self {
            eps,
            heavy_c: 4.0,
            sample_const: 1.0,
            precision_bits: 48,
            max_retries: 16,
        })
    }

    /// Per-half sample count S.
    pub fn samples_per_half(&self, n: usize) -> u64 {
        let ln_n = (n.max(2) as f64).ln();
        (self.sample_const * self.eps.powi(-2) * ln_n.powi(5)).ceil() as u64
    }
}

struct Round1Params<'a> {
    exps: &'a ExpStream,
    two_s: u64,
}

struct Round1Msg {
    /// Multiset of 2S sampled coordinates, as (coordinate, multiplicity).
    samples: Vec<(usize, u64)>,
    /// sum_i p_i(j)
    sum_p: f64,
    /// sum_i e_i^-1 p_i(j)
    sum_ep: f64,
}

fn sampler_round1(
    ctx: &ServerCtx<'_, ServerVector>,
    params: &Round1Params<'_>,
    _b: &(),
) -> ServerReply<Round1Msg> {
    let p = &ctx.state.entries;
    let mut weights = Vec::with_capacity(p.len());
    let mut sum_p = 0.0;
    let mut sum_ep = 0.0;
    for (i, &pi) in p.iter().enumerate() {
        let w = pi / params.exps.variate(i as u64);
        weights.push(w);
        sum_p += pi;
        sum_ep += w;
    }
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(ctx.seed);
    let samples = if sum_ep > 0.0 {
        multinomial_counts(&weights, params.two_s, &mut rng)
    } else {
        Vec::new()
    };
    ServerReply {
        msg: Round1Msg {
            samples,
            sum_p,
            sum_ep,
        },
        // 2S sampled coordinates plus the two totals.
        words: params.two_s + 2,
    }
}

/// One protocol execution: a single round, Fail is a legitimate outcome.
pub fn sample_additive_once(
    servers: &[ServerVector],
    config: &SamplerConfig,
    seed: u64,
) -> Result<(SampleResult, CommStats), SampleError> {
    let n = crate::comm::validate_instance(servers)?;
    let total: f64 = servers.iter().map(|s| s.entries.iter().sum::<f64>()).sum();
    if !(total > 0.0) {
        return Err(SampleError::Comm(CommError::AllZeroInstance));
    }
    let s_half = config.samples_per_half(n);
    let exps = ExpStream::full_random(derive_seed(seed, 0xadd), n as u64, config.precision_bits)
        .expect("valid stream parameters");

    let mut net = CoordinatorNet::new(servers, seed, 1);
    let params = Round1Params {
        exps: &exps,
        two_s: 2 * s_half,
    };
    let msgs = net.round(&params, &(), 0, sampler_round1)?;
    let stats = net.into_stats();

    // Coordinator: 2S redraws of (server, coordinate) pairs, split into the
    // counting half X and the estimation half Y. Drawing a server by its
    // sum_ep weight and consuming one of its i.i.d. samples realizes the
    // joint distribution of the algorithm exactly.
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(derive_seed(seed, 0xc07d));
    let server_weights: Vec<f64> = msgs.iter().map(|m| m.sum_ep).collect();
    let mut multisets: Vec<Vec<(usize, u64)>> = msgs.iter().map(|m| m.samples.clone()).collect();

    let draw_half = |rng: &mut Xoshiro256PlusPlus,
                         multisets: &mut Vec<Vec<(usize, u64)>>|
     -> BTreeMap<usize, u64> {
        let mut agg: BTreeMap<usize, u64> = BTreeMap::new();
        let per_server = multinomial_counts(&server_weights, s_half, rng);
        for (j, c) in per_server {
            for (i, k) in multiset_take(&mut multisets[j], c, rng) {
                *agg.entry(i).or_insert(0) += k;
            }
        }
        agg
    };
    let x_counts = draw_half(&mut rng, &mut multisets);
    let y_counts = draw_half(&mut rng, &mut multisets);

    let mut xs: Vec<u64> = x_counts.values().cloned().collect();
    xs.sort_unstable_by(|a, b| b.cmp(a));
    let x1 = xs.first().copied().unwrap_or(0);
    let x2 = xs.get(1).copied().unwrap_or(0);

    let ln_n = (n.max(2) as f64).ln();
    let cut = s_half as f64 / (2.0 * config.heavy_c * ln_n.powi(2));
    let outcome = if (x1 as f64) < cut {
        SampleOutcome::Fail(FailReason::MaxTooSmall)
    } else if x1 as f64 <= (1.0 + config.eps / 2.0) * x2 as f64 {
        SampleOutcome::Fail(FailReason::TopTwoClose)
    } else {
        // argmax over the estimation half, ties toward the smallest index.
        let (&i_hat, &y_hat) = y_counts
            .iter()
            .max_by(|(ia, ca), (ib, cb)| ca.cmp(cb).then(ib.cmp(ia)))
            .expect("estimation half nonempty");
        let sum_ep_total: f64 = msgs.iter().map(|m| m.sum_ep).sum();
        let sum_p_total: f64 = msgs.iter().map(|m| m.sum_p).sum();
        let q_hat = exps.variate(i_hat as u64) * (y_hat as f64 / s_half as f64) * sum_ep_total
            / sum_p_total;
        SampleOutcome::Ok { i_hat, q_hat }
    };
    Ok((SampleResult { outcome }, stats))
}

/// Result of the retrying wrapper used at call sites.
#[derive(Debug, Clone)]
pub struct RetriedSample {
    pub i_hat: usize,
    pub q_hat: f64,
    pub attempts: u32,
    pub stats: CommStats,
}

/// Run the one-round sampler, retrying Fail outcomes with fresh seeds up to
/// the configured budget; communication accumulates over attempts.
pub fn sample_additive(
    servers: &[ServerVector],
    eps: f64,
    seed: u64,
) -> Result<RetriedSample, SampleError> {
    sample_additive_with(servers, &SamplerConfig::new(eps)?, seed)
}

pub fn sample_additive_with(
    servers: &[ServerVector],
    config: &SamplerConfig,
    seed: u64,
) -> Result<RetriedSample, SampleError> {
    let mut stats = CommStats::new();
    let mut last = FailReason::MaxTooSmall;
    for attempt in 0..config.max_retries.max(1) {
        let run_seed = derive_seed(seed, attempt as u64);
        let (result, run_stats) = sample_additive_once(servers, config, run_seed)?;
        stats.absorb(&run_stats);
        match result.outcome {
            SampleOutcome::Ok { i_hat, q_hat } => {
                return Ok(RetriedSample {
                    i_hat,
                    q_hat,
                    attempts: attempt + 1,
                    stats,
                })
            }
            SampleOutcome::Fail(reason) => last = reason,
        }
    }
    Err(SampleError::Exhausted {
        attempts: config.max_retries.max(1),
        last,
    })
}

/// A tagged matrix: tag -> row, rows all of one width.
pub type TaggedMatrix = BTreeMap<u64, Vec<f64>>;

/// Sample a tag from the deduplicated approximate leverage-score
/// distribution over the union of tagged matrices. Each server's vector is
/// its own leverage scores, so the additive distribution dominates the
/// union leverage distribution by a factor s * rank.
pub fn dedup_leverage_sample(
    tagged: &[TaggedMatrix],
    eps: f64,
    seed: u64,
) -> Result<(u64, f64, CommStats), SampleError> {
    let config = SamplerConfig::new(eps)?;
    dedup_leverage_sample_with(tagged, &config, seed)
}

pub fn dedup_leverage_sample_with(
    tagged: &[TaggedMatrix],
    config: &SamplerConfig,
    seed: u64,
) -> Result<(u64, f64, CommStats), SampleError> {
    // Conforming check and tag universe.
    let mut d: Option<usize> = None;
    let mut rows_by_tag: BTreeMap<u64, &[f64]> = BTreeMap::new();
    for server in tagged {
        for (tag, row) in server {
            match d {
                None => d = Some(row.len()),
                Some(dd) if dd != row.len() => {
                    return Err(SampleError::ColumnMismatch(dd, row.len()))
                }
                _ => {}
            }
            if let Some(existing) = rows_by_tag.get(tag) {
                let same = existing.len() == row.len()
                    && existing
                        .iter()
                        .zip(row.iter())
                        .all(|(a, b)| a.to_bits() == b.to_bits());
                if !same {
                    return Err(SampleError::TagConflict { tag: *tag });
                }
            } else {
                rows_by_tag.insert(*tag, row);
            }
        }
    }
    let tags: Vec<u64> = rows_by_tag.keys().cloned().collect();
    let index_of: BTreeMap<u64, usize> = tags.iter().enumerate().map(|(i, t)| (*t, i)).collect();

    // Per-server leverage vectors over the tag universe.
    let mut servers = Vec::with_capacity(tagged.len());
    for (j, server) in tagged.iter().enumerate() {
        let mut entries = vec![0.0; tags.len()];
        if !server.is_empty() {
            let rows: Vec<&[f64]> = server.values().map(|v| v.as_slice()).collect();
            let mat =
                nalgebra::DMatrix::from_fn(server.len(), d.unwrap_or(0), |r, c| rows[r][c]);
            let scores = l2_leverage_scores(&mat)?;
            for (row_idx, tag) in server.keys().enumerate() {
                entries[index_of[tag]] = scores[row_idx];
            }
        }
        servers.push(ServerVector { owner: j, entries });
    }
    let sampled = sample_additive_with(&servers, config, seed)?;
    Ok((tags[sampled.i_hat], sampled.q_hat, sampled.stats))
}
