//! The two-round coordinator-model protocol for entrywise function sums.
//!
//! Round 1: every server samples coordinates proportionally to
//! `f(x_i(j)) / e_i` and ships the sampled coordinates, their local values,
//! and its rescaled total. The coordinator builds a conservative
//! underestimate `xhat_i` of every sampled coordinate's aggregate value
//! from those messages alone: exact credit for servers whose sampling
//! probability made their presence certain, nothing for provably ignorable
//! servers, and a concentration-based credit for the geometric
//! (probability, total) buckets that are populated enough to estimate.
//!
//! Round 2: the coordinates with the largest `f(xhat_i)/e_i` are queried
//! everywhere, which pins the true maximum of `f(x_i)/e_i`; by
//! max-stability, medians of independent copies of that maximum rescale to
//! a `1 +- eps` estimate of `sum_i f(x_i)`.

use super::fnspec::FnSpec;
use super::params::ProtocolParams;
use crate::comm::{
    validate_instance, CommError, CommStats, CoordinatorNet, ServerCtx, ServerReply, ServerVector,
};
use crate::randomness::{derive_seed, ExpStream, DEFAULT_DISCRETIZATION_EPS};
use crate::sampler::weighted::multinomial_support;
use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;
use std::collections::HashMap;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum FsumError {
    #[error(transparent)]
    Comm(#[from] CommError),
    #[error("accuracy eps must lie in (0, 1), got {0}")]
    BadEps(f64),
    #[error("eps {eps} below the 1/sqrt(n) validity floor {floor} for n = {n}")]
    EpsTooSmall { eps: f64, floor: f64, n: usize },
    #[error("moment order must satisfy k >= 1, got {0}")]
    BadMomentOrder(f64),
}

/// What one server sends in round 1, per exponential copy.
#[derive(Debug, Clone)]
pub struct Round1Msg {
    /// (coordinate, local value) for each distinct sampled coordinate.
    pub sampled: Vec<(u64, f64)>,
    /// sum_i f(x_i(j)) / e_i over the whole local vector.
    pub total: f64,
}

impl Round1Msg {
    /// Message width: one word per coordinate, one per value, one total.
    pub fn words(&self) -> u64 {
        2 * self.sampled.len() as u64 + 1
    }
}

/// Draw one server's round-1 message: the support of N draws from the
/// distribution proportional to f(x_i)/e_i.
pub fn round1_server_sample(
    x: &[f64],
    fn_spec: &FnSpec,
    exps: &ExpStream,
    n_samples: u64,
    seed: u64,
) -> Round1Msg {
    let mut weights = Vec::with_capacity(x.len());
    let mut total = 0.0;
    for (i, &xi) in x.iter().enumerate() {
        let w = if xi > 0.0 {
            fn_spec.apply(xi) / exps.variate(i as u64)
        } else {
            0.0
        };
        weights.push(w);
        total += w;
    }
    if total <= 0.0 {
        return Round1Msg {
            sampled: Vec::new(),
            total: 0.0,
        };
    }
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    let sampled = multinomial_support(&weights, n_samples, &mut rng)
        .into_iter()
        .map(|i| (i as u64, x[i]))
        .collect();
    Round1Msg { sampled, total }
}

/// Everything the coordinator knows after round 1 of one copy.
#[derive(Debug, Clone)]
pub struct CoordinatorView {
    pub msgs: Vec<Round1Msg>,
    pub grand_total: f64,
    pub f_start: f64,
}

impl CoordinatorView {
    pub fn assemble(params: &ProtocolParams, msgs: Vec<Round1Msg>) -> Self {
        let grand_total: f64 = msgs.iter().map(|m| m.total).sum();
        let f_start = params.f_start(grand_total);
        Self {
            msgs,
            grand_total,
            f_start,
        }
    }
}

/// Per-coordinate underestimate and its rescaled score.
#[derive(Debug, Clone, PartialEq)]
pub struct CoordEstimate {
    pub coord: u64,
    pub xhat: f64,
    pub est: f64,
}

/// The round-1-only estimator: for every sampled coordinate, a value
/// `xhat_i <= x_i` (with high probability) built from exact credits,
/// dropped negligible servers, and size-estimated buckets.
pub fn estimate_xhat(
    view: &CoordinatorView,
    fn_spec: &FnSpec,
    params: &ProtocolParams,
    exps: &ExpStream,
) -> Vec<CoordEstimate> {
    // coordinate -> contributions (local value, server total).
    let mut contributions: HashMap<u64, Vec<(f64, f64)>> = HashMap::new();
    for msg in &view.msgs {
        if msg.total <= 0.0 {
            continue;
        }
        for &(coord, value) in &msg.sampled {
            contributions
                .entry(coord)
                .or_default()
                .push((value, msg.total));
        }
    }

    let ln_ratio = params.sqrt_theta.ln();
    let n_f = params.n_samples as f64;
    let mut out: Vec<CoordEstimate> = Vec::with_capacity(contributions.len());
    for (coord, entries) in contributions {
        let e_i = exps.variate(coord);
        let mut xhat = 0.0f64;
        // (a, b) -> (servers seen, sum of their local values)
        let mut buckets: HashMap<(u32, u32), (u64, f64)> = HashMap::new();
        for (value, server_total) in entries {
            let q = fn_spec.apply(value) / e_i / server_total;
            if q > params.large_threshold {
                xhat += value;
                continue;
            }
            if q < params.p_start {
                continue; // Small: provably ignorable
            }
            if server_total <= view.f_start {
                continue; // whole-server total negligible
            }
            let a = ((q / params.p_start).ln() / ln_ratio).floor().max(0.0) as u32;
            let b = ((server_total / view.f_start).ln() / ln_ratio)
                .floor()
                .max(0.0) as u32;
            let slot = buckets.entry((a, b)).or_insert((0, 0.0));
            slot.0 += 1;
            slot.1 += value;
        }
        for ((a, b), (count, sum_values)) in buckets {
            let q_upper = params.sqrt_theta.powi(a as i32 + 1) * params.p_start;
            if q_upper > params.exact_cutoff {
                // Sampling here was certain: the bucket is complete.
                xhat += sum_values;
            } else if count as f64 >= params.mark_threshold {
                // Probably good: the count concentrates on the bucket size.
                let q_cap = q_upper.min(1.0);
                let include_prob = -((n_f * (-q_cap).ln_1p()).exp() - 1.0);
                let include_prob = include_prob.clamp(f64::MIN_POSITIVE, 1.0);
                let level = e_i
                    * params.sqrt_theta.powi((a + b) as i32)
                    * params.p_start
                    * view.f_start;
                xhat += 0.4 * count as f64 / include_prob * fn_spec.inverse(level);
            }
            // Unmarked sparse buckets are dropped: their total contribution
            // is within the ignorable budget.
        }
        let est = if xhat > 0.0 {
            fn_spec.apply(xhat) / e_i
        } else {
            0.0
        };
        out.push(CoordEstimate { coord, xhat, est });
    }
    out.sort_unstable_by(|l, r| r.est.total_cmp(&l.est).then(l.coord.cmp(&r.coord)));
    out
}

/// Select the probably-large candidate set: the top `pl_size` coordinates
/// by score (all of them when the bound exceeds the candidate count).
pub fn select_pl(estimates: &[CoordEstimate], params: &ProtocolParams) -> Vec<u64> {
    let keep = (params.pl_size.min(estimates.len() as u64)) as usize;
    let mut pl: Vec<u64> = estimates[..keep].iter().map(|c| c.coord).collect();
    pl.sort_unstable();
    pl
}

/// Which backend generates the shared exponential variates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ExpBackendKind {
    #[default]
    FullRandom,
    NisanPrg,
}

struct MaxSpec<'a> {
    fn_spec: &'a FnSpec,
    params: &'a ProtocolParams,
    copies: usize,
    copy_offset: usize,
    exp_seed: u64,
    disc_eps: f64,
    backend: ExpBackendKind,
}

impl MaxSpec<'_> {
    fn exps(&self, copy: usize) -> ExpStream {
        let seed = derive_seed(self.exp_seed, (self.copy_offset + copy) as u64);
        let n = self.params.n as u64;
        match self.backend {
            ExpBackendKind::FullRandom => {
                ExpStream::full_random_with_eps(seed, n, 48, self.disc_eps)
            }
            ExpBackendKind::NisanPrg => ExpStream::nisan_with_eps(seed, n, 48, self.disc_eps),
        }
        .expect("valid stream parameters")
    }
}

fn max_round1(
    ctx: &ServerCtx<'_, ServerVector>,
    spec: &MaxSpec<'_>,
    _b: &(),
) -> ServerReply<Vec<Round1Msg>> {
    let mut msgs = Vec::with_capacity(spec.copies);
    let mut words = 0;
    for copy in 0..spec.copies {
        let exps = spec.exps(copy);
        let msg = round1_server_sample(
            &ctx.state.entries,
            spec.fn_spec,
            &exps,
            spec.params.n_samples,
            derive_seed(ctx.seed, copy as u64),
        );
        words += msg.words();
        msgs.push(msg);
    }
    ServerReply { msg: msgs, words }
}

fn max_round2(
    ctx: &ServerCtx<'_, ServerVector>,
    _spec: &MaxSpec<'_>,
    pls: &Vec<Vec<u64>>,
) -> ServerReply<Vec<Vec<f64>>> {
    let mut values = Vec::with_capacity(pls.len());
    let mut words = 0;
    for pl in pls {
        words += pl.len() as u64;
        values.push(
            pl.iter()
                .map(|&i| ctx.state.entries[i as usize])
                .collect::<Vec<f64>>(),
        );
    }
    ServerReply {
        msg: values,
        words,
    }
}

/// Run `copies` concurrent instances of the max-recovery protocol inside
/// one two-round exchange; returns the per-copy values of
/// `max_i f(x_i)/e_i`.
fn run_max_copies(
    servers: &[ServerVector],
    fn_spec: &FnSpec,
    params: &ProtocolParams,
    seed: u64,
    copies: usize,
    disc_eps: f64,
    backend: ExpBackendKind,
    stats: &mut CommStats,
) -> Result<Vec<f64>, FsumError> {
    let exp_seed = derive_seed(seed, 0xe59);
    let mut outputs = Vec::with_capacity(copies);
    // Copies are processed in batches purely to bound transient memory; all
    // batches charge the same two rounds.
    let batch = 128usize;
    let mut done = 0usize;
    while done < copies {
        let take = batch.min(copies - done);
        let spec = MaxSpec {
            fn_spec,
            params,
            copies: take,
            copy_offset: done,
            exp_seed,
            disc_eps,
            backend,
        };
        let mut net = CoordinatorNet::new(servers, derive_seed(seed, done as u64), 2);
        let round1 = net.round(&spec, &(), 0, max_round1)?;

        // Per copy: assemble the view, score candidates, pick PL.
        let mut pls: Vec<Vec<u64>> = Vec::with_capacity(take);
        let mut exp_streams: Vec<ExpStream> = Vec::with_capacity(take);
        for copy in 0..take {
            let msgs: Vec<Round1Msg> = round1.iter().map(|m| m[copy].clone()).collect();
            let view = CoordinatorView::assemble(params, msgs);
            let exps = spec.exps(copy);
            let estimates = estimate_xhat(&view, fn_spec, params, &exps);
            pls.push(select_pl(&estimates, params));
            exp_streams.push(exps);
        }
        let bcast_words: u64 = pls.iter().map(|p| p.len() as u64).sum();
        let round2 = net.round(&spec, &pls, bcast_words, max_round2)?;

        for copy in 0..take {
            let pl = &pls[copy];
            let exps = &exp_streams[copy];
            let mut best = 0.0f64;
            for (slot, &coord) in pl.iter().enumerate() {
                let aggregate: f64 = round2.iter().map(|server| server[copy][slot]).sum();
                let score = fn_spec.apply(aggregate) / exps.variate(coord);
                if score > best {
                    best = score;
                }
            }
            outputs.push(best);
        }
        stats.absorb(net.stats());
        done += take;
    }
    Ok(outputs)
}

fn check_positive_instance(servers: &[ServerVector]) -> Result<usize, FsumError> {
    let n = validate_instance(servers)?;
    let total: f64 = servers.iter().map(|s| s.entries.iter().sum::<f64>()).sum();
    if !(total > 0.0) {
        return Err(FsumError::Comm(CommError::AllZeroInstance));
    }
    Ok(n)
}

/// Recover `max_i f(x_i)/e_i` for one shared exponential copy.
pub fn recover_max(
    servers: &[ServerVector],
    fn_spec: &FnSpec,
    params: &ProtocolParams,
    seed: u64,
) -> Result<(f64, CommStats), FsumError> {
    check_positive_instance(servers)?;
    let mut stats = CommStats::new();
    let outputs = run_max_copies(
        servers,
        fn_spec,
        params,
        seed,
        1,
        DEFAULT_DISCRETIZATION_EPS,
        ExpBackendKind::FullRandom,
        &mut stats,
    )?;
    Ok((outputs[0], stats))
}

/// The exponential stream a given `recover_max` run sees, for tests that
/// compare against ground truth.
pub fn recover_max_exps(params: &ProtocolParams, seed: u64) -> ExpStream {
    ExpStream::full_random_with_eps(
        derive_seed(derive_seed(seed, 0xe59), 0),
        params.n as u64,
        48,
        DEFAULT_DISCRETIZATION_EPS,
    )
    .expect("valid stream parameters")
}

/// Estimate `sum_i f(x_i)` to `1 +- eps`: ln(2) times the median of
/// ceil(16/eps^2) concurrent max-recovery copies, all inside two rounds.
pub fn fsum_estimate(
    servers: &[ServerVector],
    fn_spec: &FnSpec,
    eps: f64,
    seed: u64,
) -> Result<(f64, CommStats), FsumError> {
    let params_template = |n: usize, s: usize| ProtocolParams::derive(fn_spec, n, s);
    fsum_estimate_with(
        servers,
        fn_spec,
        eps,
        seed,
        ExpBackendKind::FullRandom,
        &params_template,
    )
}

pub fn fsum_estimate_with(
    servers: &[ServerVector],
    fn_spec: &FnSpec,
    eps: f64,
    seed: u64,
    backend: ExpBackendKind,
    derive_params: &dyn Fn(usize, usize) -> ProtocolParams,
) -> Result<(f64, CommStats), FsumError> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(FsumError::BadEps(eps));
    }
    let n = check_positive_instance(servers)?;
    // The analysis needs eps bounded below by an inverse polynomial in n;
    // 1/sqrt(n) keeps every supported (n, eps) regime valid.
    let floor = (n.max(2) as f64).powf(-0.5);
    if eps < floor {
        return Err(FsumError::EpsTooSmall { eps, floor, n });
    }
    let params = derive_params(n, servers.len());
    let copies = (16.0 / (eps * eps)).ceil() as usize;
    let mut stats = CommStats::new();
    let outputs = run_max_copies(
        servers, fn_spec, &params, seed, copies, eps, backend, &mut stats,
    )?;
    Ok((median(outputs) * std::f64::consts::LN_2, stats))
}

/// F_k moment estimation: the power-function instantiation.
pub fn fk_estimate(
    servers: &[ServerVector],
    k: f64,
    eps: f64,
    seed: u64,
) -> Result<(f64, CommStats), FsumError> {
    if !(k >= 1.0) {
        return Err(FsumError::BadMomentOrder(k));
    }
    let fn_spec = FnSpec::power(k).expect("k validated");
    fsum_estimate(servers, &fn_spec, eps, seed)
}

fn median(mut values: Vec<f64>) -> f64 {
    values.sort_unstable_by(|a, b| a.total_cmp(b));
    let n = values.len();
    if n == 0 {
        return 0.0;
    }
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}
