//! Higher-order correlation estimation.
//!
//! Each server holds a set of n-dimensional vectors; the target is
//! `sum over distinct k-tuples of f(sum_j sum_{v in W_j} g(v_{i1..ik}))`.
//! Conceptually this is the two-round sum protocol run on implicit vectors
//! indexed by distinct ordered k-tuples. Tuples are streamed in
//! lexicographic order, their shared exponentials come from the small-seed
//! PRG indexed by tuple rank, and each server's round-1 sample support is
//! drawn by a one-pass conditional-binomial walk, so no server ever holds
//! the n^k-entry vector.

use super::fnspec::FnSpec;
use super::params::ProtocolParams;
use super::protocol::{estimate_xhat, select_pl, CoordinatorView, FsumError, Round1Msg};
use crate::comm::{CommStats, CoordinatorNet, ServerCtx, ServerReply};
use crate::randomness::{derive_seed, ExpStream};
use crate::sampler::weighted::fast_binomial;
use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum HocError {
    #[error("tuple order k must satisfy 1 <= k <= n, got k = {k}, n = {n}")]
    BadOrder { k: usize, n: usize },
    #[error("tuple space n!/(n-k)! = {count} exceeds the supported 2^40 bound")]
    TupleSpaceTooLarge { count: u128 },
    #[error(transparent)]
    Fsum(#[from] FsumError),
}

/// Number of ordered k-tuples with distinct entries from [n].
pub fn tuple_count(n: usize, k: usize) -> Result<u64, HocError> {
    if k == 0 || k > n {
        return Err(HocError::BadOrder { k, n });
    }
    let mut count: u128 = 1;
    for i in 0..k {
        count *= (n - i) as u128;
        if count > 1 << 40 {
            return Err(HocError::TupleSpaceTooLarge { count });
        }
    }
    Ok(count as u64)
}

/// The rank-th distinct ordered k-tuple in lexicographic order.
pub fn unrank_tuple(n: usize, k: usize, rank: u64) -> Vec<usize> {
    // Position weights: after fixing a prefix of length i, the suffix spans
    // (n-i-1)(n-i-2)...(n-k+1) combinations.
    let mut weights = vec![1u64; k];
    for i in (0..k - 1).rev() {
        weights[i] = weights[i + 1] * (n as u64 - i as u64 - 1);
    }
    let mut remaining: Vec<usize> = (0..n).collect();
    let mut rank = rank;
    let mut tuple = Vec::with_capacity(k);
    for w in weights {
        let pos = (rank / w) as usize;
        rank %= w;
        tuple.push(remaining.remove(pos));
    }
    tuple
}

/// Streaming iterator over distinct ordered k-tuples in lex order.
pub struct TupleStream {
    n: usize,
    k: usize,
    next_rank: u64,
    count: u64,
    current: Vec<usize>,
}

impl TupleStream {
    pub fn new(n: usize, k: usize) -> Result<Self, HocError> {
        let count = tuple_count(n, k)?;
        Ok(Self {
            n,
            k,
            next_rank: 0,
            count,
            current: Vec::new(),
        })
    }
}

impl Iterator for TupleStream {
    type Item = (u64, Vec<usize>);

    fn next(&mut self) -> Option<Self::Item> {
        if self.next_rank >= self.count {
            return None;
        }
        // Unranking each step keeps the iterator trivially correct; the
        // tuple spaces in scope are small enough that this is not a cost.
        self.current = unrank_tuple(self.n, self.k, self.next_rank);
        let item = (self.next_rank, self.current.clone());
        self.next_rank += 1;
        Some(item)
    }
}

/// Pluggable nonnegative tuple statistic.
pub type TupleFn = dyn Fn(&[f64]) -> f64 + Sync;

/// A server's dataset: a set of n-dimensional vectors.
pub type VectorSet = Vec<Vec<f64>>;

/// sum_{v in W_j} g(v_{i_1}, ..., v_{i_k}).
fn tuple_weight(vectors: &VectorSet, tuple: &[usize], g: &TupleFn) -> f64 {
    let mut scratch = vec![0.0; tuple.len()];
    let mut acc = 0.0;
    for v in vectors {
        for (slot, &idx) in tuple.iter().enumerate() {
            scratch[slot] = v[idx];
        }
        acc += g(&scratch);
    }
    acc
}

struct HocSpec<'a> {
    fn_spec: &'a FnSpec,
    params: &'a ProtocolParams,
    g: &'a TupleFn,
    n: usize,
    k: usize,
    tuples: u64,
    copies: usize,
    copy_offset: usize,
    exp_seed: u64,
    disc_eps: f64,
}

impl HocSpec<'_> {
    fn exps(&self, copy: usize) -> ExpStream {
        ExpStream::nisan_with_eps(
            derive_seed(self.exp_seed, (self.copy_offset + copy) as u64),
            self.tuples,
            48,
            self.disc_eps,
        )
        .expect("valid stream parameters")
    }
}

/// Round-1 support sampling over the implicit tuple vector: two streaming
/// passes, O(1) working state plus the emitted records.
fn hoc_sample_support(
    vectors: &VectorSet,
    spec: &HocSpec<'_>,
    exps: &ExpStream,
    seed: u64,
    peak_records: &mut u64,
) -> Round1Msg {
    // Pass 1: total, minimum positive share.
    let mut total = 0.0f64;
    let mut min_pos = f64::INFINITY;
    for (rank, tuple) in TupleStream::new(spec.n, spec.k).expect("validated") {
        let value = tuple_weight(vectors, &tuple, spec.g);
        if value > 0.0 {
            let w = spec.fn_spec.apply(value) / exps.variate(rank);
            total += w;
            min_pos = min_pos.min(w);
        }
    }
    if total <= 0.0 {
        return Round1Msg {
            sampled: Vec::new(),
            total: 0.0,
        };
    }
    let n_draws = spec.params.n_samples;
    let saturated = (n_draws as f64) * (min_pos / total) >= 60.0;

    // Pass 2: emit the support.
    let mut sampled: Vec<(u64, f64)> = Vec::new();
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    let mut suffix = total;
    let mut remaining = n_draws;
    for (rank, tuple) in TupleStream::new(spec.n, spec.k).expect("validated") {
        let value = tuple_weight(vectors, &tuple, spec.g);
        if value <= 0.0 {
            continue;
        }
        let w = spec.fn_spec.apply(value) / exps.variate(rank);
        if saturated {
            sampled.push((rank, value));
        } else {
            if remaining == 0 {
                break;
            }
            let p = (w / suffix).min(1.0);
            let c = if suffix <= w {
                remaining
            } else {
                fast_binomial(remaining, p, &mut rng)
            };
            if c > 0 {
                sampled.push((rank, value));
                remaining -= c;
            }
            suffix -= w;
        }
        *peak_records = (*peak_records).max(sampled.len() as u64);
    }
    Round1Msg { sampled, total }
}

fn hoc_round1(
    ctx: &ServerCtx<'_, VectorSet>,
    spec: &HocSpec<'_>,
    _b: &(),
) -> ServerReply<(Vec<Round1Msg>, u64)> {
    let mut msgs = Vec::with_capacity(spec.copies);
    let mut words = 0;
    let mut peak = 0u64;
    for copy in 0..spec.copies {
        let exps = spec.exps(copy);
        let msg = hoc_sample_support(
            ctx.state,
            spec,
            &exps,
            derive_seed(ctx.seed, copy as u64),
            &mut peak,
        );
        words += msg.words();
        msgs.push(msg);
    }
    ServerReply {
        msg: (msgs, peak),
        words,
    }
}

fn hoc_round2(
    ctx: &ServerCtx<'_, VectorSet>,
    spec: &HocSpec<'_>,
    pls: &Vec<Vec<u64>>,
) -> ServerReply<Vec<Vec<f64>>> {
    let mut values = Vec::with_capacity(pls.len());
    let mut words = 0;
    for pl in pls {
        words += pl.len() as u64;
        values.push(
            pl.iter()
                .map(|&rank| {
                    let tuple = unrank_tuple(spec.n, spec.k, rank);
                    tuple_weight(ctx.state, &tuple, spec.g)
                })
                .collect::<Vec<f64>>(),
        );
    }
    ServerReply {
        msg: values,
        words,
    }
}

/// Outcome of a higher-order correlation run.
#[derive(Debug, Clone)]
pub struct HocOutcome {
    pub estimate: f64,
    pub stats: CommStats,
    /// High-water mark of resident tuple records at any server.
    pub peak_tuple_records: u64,
}

/// Estimate M(f, g, W_1..W_s) to 1 +- eps over distinct ordered k-tuples.
pub fn higher_order_correlation(
    servers: &[VectorSet],
    fn_spec: &FnSpec,
    g: &TupleFn,
    k: usize,
    eps: f64,
    seed: u64,
) -> Result<HocOutcome, HocError> {
    higher_order_correlation_with(servers, fn_spec, g, k, eps, seed, 1.0)
}

pub fn higher_order_correlation_with(
    servers: &[VectorSet],
    fn_spec: &FnSpec,
    g: &TupleFn,
    k: usize,
    eps: f64,
    seed: u64,
    sample_const: f64,
) -> Result<HocOutcome, HocError> {
    let n = servers
        .iter()
        .flat_map(|w| w.iter().map(|v| v.len()))
        .next()
        .unwrap_or(0);
    let tuples = tuple_count(n, k)?;
    if !(eps > 0.0 && eps < 1.0) {
        return Err(HocError::Fsum(FsumError::BadEps(eps)));
    }
    let floor = (tuples.max(2) as f64).powf(-0.5);
    if eps < floor {
        return Err(HocError::Fsum(FsumError::EpsTooSmall {
            eps,
            floor,
            n: tuples as usize,
        }));
    }
    let params = ProtocolParams::derive_with(fn_spec, tuples as usize, servers.len(), 4.0, sample_const);
    let copies = (16.0 / (eps * eps)).ceil() as usize;
    let exp_seed = derive_seed(seed, 0x40c);

    let mut stats = CommStats::new();
    let mut outputs = Vec::with_capacity(copies);
    let mut peak_records = 0u64;
    let batch = 64usize;
    let mut done = 0usize;
    while done < copies {
        let take = batch.min(copies - done);
        let spec = HocSpec {
            fn_spec,
            params: &params,
            g,
            n,
            k,
            tuples,
            copies: take,
            copy_offset: done,
            exp_seed,
            disc_eps: eps,
        };
        let mut net = CoordinatorNet::new(servers, derive_seed(seed, done as u64), 2);
        let round1 = net
            .round(&spec, &(), 0, hoc_round1)
            .map_err(FsumError::from)?;
        for (_, peak) in &round1 {
            peak_records = peak_records.max(*peak);
        }

        let mut pls: Vec<Vec<u64>> = Vec::with_capacity(take);
        let mut streams: Vec<ExpStream> = Vec::with_capacity(take);
        for copy in 0..take {
            let msgs: Vec<Round1Msg> = round1.iter().map(|(m, _)| m[copy].clone()).collect();
            let view = CoordinatorView::assemble(&params, msgs);
            let exps = spec.exps(copy);
            let estimates = estimate_xhat(&view, fn_spec, &params, &exps);
            pls.push(select_pl(&estimates, &params));
            streams.push(exps);
        }
        let bcast_words: u64 = pls.iter().map(|p| p.len() as u64).sum();
        let round2 = net
            .round(&spec, &pls, bcast_words, hoc_round2)
            .map_err(FsumError::from)?;

        for copy in 0..take {
            let mut best = 0.0f64;
            for (slot, &rank) in pls[copy].iter().enumerate() {
                let aggregate: f64 = round2.iter().map(|server| server[copy][slot]).sum();
                let score = fn_spec.apply(aggregate) / streams[copy].variate(rank);
                best = best.max(score);
            }
            outputs.push(best);
        }
        stats.absorb(net.stats());
        done += take;
    }

    outputs.sort_unstable_by(|a, b| a.total_cmp(b));
    let mid = outputs.len() / 2;
    let median = if outputs.len() % 2 == 1 {
        outputs[mid]
    } else {
        0.5 * (outputs[mid - 1] + outputs[mid])
    };
    Ok(HocOutcome {
        estimate: median * std::f64::consts::LN_2,
        stats,
        peak_tuple_records: peak_records,
    })
}

/// Brute-force oracle: enumerate every distinct tuple directly.
pub fn hoc_bruteforce(servers: &[VectorSet], fn_spec: &FnSpec, g: &TupleFn, k: usize) -> f64 {
    let n = servers
        .iter()
        .flat_map(|w| w.iter().map(|v| v.len()))
        .next()
        .unwrap_or(0);
    let mut total = 0.0;
    for (_, tuple) in TupleStream::new(n, k).expect("valid") {
        let agg: f64 = servers.iter().map(|w| tuple_weight(w, &tuple, g)).sum();
        total += fn_spec.apply(agg);
    }
    total
}
