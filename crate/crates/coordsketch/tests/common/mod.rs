//! Shared oracles and statistics helpers for the integration suites.
//!
//! Everything here recomputes expected values by direct enumeration,
//! closed forms, or an external LP solver, independently of the protocol
//! paths under test.

#![allow(dead_code)]

use coordsketch::comm::ServerVector;
use coordsketch::fsum::{
    estimate_xhat, recover_max_exps, round1_server_sample, select_pl, CoordinatorView, FnSpec,
    ProtocolParams, Round1Msg,
};
use coordsketch::sampler::{sample_additive_once, SampleOutcome, SamplerConfig};
use coordsketch::randomness::ExpStream;
use coordsketch::sketch::Dataset;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

/// Two-sample Kolmogorov-Smirnov distance.
pub fn ks_two_sample(a: &mut [f64], b: &mut [f64]) -> f64 {
    a.sort_by(|x, y| x.total_cmp(y));
    b.sort_by(|x, y| x.total_cmp(y));
    let (mut i, mut j) = (0usize, 0usize);
    let mut ks = 0.0f64;
    while i < a.len() && j < b.len() {
        if a[i] <= b[j] {
            i += 1;
        } else {
            j += 1;
        }
        let fa = i as f64 / a.len() as f64;
        let fb = j as f64 / b.len() as f64;
        ks = ks.max((fa - fb).abs());
    }
    ks
}

/// Total-variation distance between two discrete distributions.
pub fn tv_distance(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p
        .iter()
        .zip(q)
        .map(|(a, b)| (a - b).abs())
        .sum::<f64>()
}

/// Exact normalized additive distribution q_i / sum q.
pub fn exact_additive_distribution(servers: &[ServerVector]) -> Vec<f64> {
    let n = servers[0].entries.len();
    let mut q = vec![0.0; n];
    for s in servers {
        for (i, v) in s.entries.iter().enumerate() {
            q[i] += v;
        }
    }
    let total: f64 = q.iter().sum();
    q.iter_mut().for_each(|v| *v /= total);
    q
}

/// Direct function-sum ground truth.
pub fn direct_fsum(servers: &[ServerVector], f: impl Fn(f64) -> f64) -> f64 {
    let n = servers[0].entries.len();
    (0..n)
        .map(|i| f(servers.iter().map(|s| s.entries[i]).sum::<f64>()))
        .sum()
}

/// Random nonnegative coordinator-model instance.
pub fn random_instance(seed: u64, n: usize, s: usize) -> Vec<ServerVector> {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    (0..s)
        .map(|j| ServerVector {
            owner: j,
            entries: (0..n).map(|_| rng.gen_range(0.0..1.0)).collect(),
        })
        .collect()
}

/// Gaussian dataset with fresh keys.
pub fn gaussian_dataset(seed: u64, prefix: &str, n: usize, d: usize) -> Dataset {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    Dataset::from_rows(
        d,
        (0..n).map(|i| {
            let row: Vec<f64> = (0..d).map(|_| gauss(&mut rng)).collect();
            (format!("{prefix}{i}"), row)
        }),
    )
    .unwrap()
}

pub fn gauss(rng: &mut impl Rng) -> f64 {
    let u1: f64 = rng.gen_range(1e-12..1.0);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Rank-r signal plus noise dataset (the LRA geometry).
pub fn low_rank_dataset(seed: u64, n: usize, d: usize, rank: usize, noise: f64) -> Dataset {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    let factors: Vec<Vec<f64>> = (0..rank)
        .map(|_| (0..d).map(|_| gauss(&mut rng)).collect())
        .collect();
    Dataset::from_rows(
        d,
        (0..n).map(|i| {
            let mut row = vec![0.0; d];
            for f in &factors {
                let c = gauss(&mut rng);
                for (slot, v) in row.iter_mut().zip(f) {
                    *slot += c * v;
                }
            }
            for slot in row.iter_mut() {
                *slot += noise * gauss(&mut rng);
            }
            (format!("r{i}"), row)
        }),
    )
    .unwrap()
}

/// Generalized eigenvalue range of (M^T M, A^T A), computed directly from
/// a whitening eigendecomposition.
pub fn eigen_range(m: &DMatrix<f64>, a: &DMatrix<f64>) -> (f64, f64) {
    let gram_a = a.transpose() * a;
    let gram_m = m.transpose() * m;
    let eig = gram_a.clone().symmetric_eigen();
    let max_ev = eig.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
    let cut = max_ev * 1e-12;
    let cols: Vec<usize> = (0..eig.eigenvalues.len())
        .filter(|&i| eig.eigenvalues[i] > cut)
        .collect();
    let mut w = DMatrix::zeros(gram_a.nrows(), cols.len());
    for (j, &i) in cols.iter().enumerate() {
        let s = 1.0 / eig.eigenvalues[i].sqrt();
        for r in 0..gram_a.nrows() {
            w[(r, j)] = eig.eigenvectors[(r, i)] * s;
        }
    }
    let mid = w.transpose() * gram_m * &w;
    let me = mid.symmetric_eigen();
    (
        me.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min),
        me.eigenvalues.iter().cloned().fold(0.0f64, f64::max),
    )
}

/// Exact l1 regression optimum on (features | label) rows via LP.
pub fn l1_regression_lp(rows: &DMatrix<f64>) -> (Vec<f64>, f64) {
    use minilp::{ComparisonOp, OptimizationDirection, Problem};
    let n = rows.nrows();
    let d = rows.ncols();
    let mut pb = Problem::new(OptimizationDirection::Minimize);
    let xs: Vec<_> = (0..d - 1)
        .map(|_| pb.add_var(0.0, (f64::NEG_INFINITY, f64::INFINITY)))
        .collect();
    let ts: Vec<_> = (0..n).map(|_| pb.add_var(1.0, (0.0, f64::INFINITY))).collect();
    for i in 0..n {
        let b = rows[(i, d - 1)];
        let mut pos: Vec<(minilp::Variable, f64)> =
            (0..d - 1).map(|j| (xs[j], rows[(i, j)])).collect();
        pos.push((ts[i], -1.0));
        pb.add_constraint(pos.as_slice(), ComparisonOp::Le, b);
        let mut neg: Vec<(minilp::Variable, f64)> =
            (0..d - 1).map(|j| (xs[j], -rows[(i, j)])).collect();
        neg.push((ts[i], -1.0));
        pb.add_constraint(neg.as_slice(), ComparisonOp::Le, -b);
    }
    let sol = pb.solve().expect("LP solvable");
    let coef: Vec<f64> = xs.iter().map(|x| sol[*x]).collect();
    (coef, sol.objective())
}

/// Least-squares optimum and its cost via the normal equations.
pub fn l2_regression_normal_equations(rows: &DMatrix<f64>) -> (Vec<f64>, f64) {
    let d = rows.ncols();
    let feats = rows.columns(0, d - 1).into_owned();
    let labels: DVector<f64> = rows.column(d - 1).into_owned();
    let gram = feats.transpose() * &feats;
    let rhs = feats.transpose() * &labels;
    let coef = gram
        .cholesky()
        .map(|c| c.solve(&rhs))
        .unwrap_or_else(|| feats.clone().svd(true, true).solve(&labels, 1e-12).unwrap());
    let resid = &feats * &coef - labels;
    let cost = resid.norm_squared();
    (coef.iter().cloned().collect(), cost)
}

/// lp cost of a coefficient vector on (features | label) rows.
pub fn lp_cost(rows: &DMatrix<f64>, coef: &[f64], p: f64) -> f64 {
    let d = rows.ncols();
    (0..rows.nrows())
        .map(|i| {
            let mut r = -rows[(i, d - 1)];
            for j in 0..d - 1 {
                r += rows[(i, j)] * coef[j];
            }
            r.abs().powf(p)
        })
        .sum()
}

/// Shared-exponential law measurements used by both the randomness suite
/// and acceptance criterion checks.
pub struct ExpLawStats {
    pub max_stability_ks: f64,
    pub argmax_max_dev: f64,
    pub heavy_hitter_fail_frac: f64,
    pub median_hit_frac: f64,
}

pub fn measure_exp_laws(seed: u64) -> ExpLawStats {
    // Max-stability and argmax law on f = (3, 1, 2, 0.5).
    let f = [3.0, 1.0, 2.0, 0.5];
    let total: f64 = f.iter().sum();
    let trials = 100_000u64;
    let mut lhs = Vec::with_capacity(trials as usize);
    let mut rhs = Vec::with_capacity(trials as usize);
    let mut argmax_counts = [0u64; 4];
    for t in 0..trials {
        let ea = ExpStream::full_random(seed.wrapping_add(2 * t), 4, 48).unwrap();
        let eb = ExpStream::full_random(seed.wrapping_add(2 * t + 1), 1, 48).unwrap();
        let mut best = f64::NEG_INFINITY;
        let mut best_i = 0usize;
        for i in 0..4 {
            let v = f[i] / ea.variate(i as u64);
            if v > best {
                best = v;
                best_i = i;
            }
        }
        argmax_counts[best_i] += 1;
        lhs.push(best);
        rhs.push(total / eb.variate(0));
    }
    let max_stability_ks = ks_two_sample(&mut lhs, &mut rhs);
    let argmax_max_dev = (0..4)
        .map(|i| (argmax_counts[i] as f64 / trials as f64 - f[i] / total).abs())
        .fold(0.0f64, f64::max);

    // Heavy-hitter event at n = 1024, C = 4.
    let n = 1024usize;
    let heavy_c = 4.0;
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed ^ 0x77);
    let fs: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
    let ln_n = (n as f64).ln();
    let cut = heavy_c * ln_n * ln_n;
    let hh_trials = 100_000u64;
    let mut hh_fails = 0u64;
    for t in 0..hh_trials {
        let es = ExpStream::full_random(seed.wrapping_add(0x5000 + t), n as u64, 48).unwrap();
        let mut max = 0.0f64;
        let mut sum = 0.0f64;
        for (i, fi) in fs.iter().enumerate() {
            let v = fi / es.variate(i as u64);
            sum += v;
            max = max.max(v);
        }
        if max < sum / cut {
            hh_fails += 1;
        }
    }
    let heavy_hitter_fail_frac = hh_fails as f64 / hh_trials as f64;

    // Median estimator with t = ceil(16 / eps^2), eps = 0.2.
    let eps = 0.2f64;
    let copies = (16.0 / (eps * eps)).ceil() as u64;
    let value = 7.3;
    let med_trials = 1000u64;
    let mut hits = 0u64;
    for t in 0..med_trials {
        let es =
            ExpStream::full_random(seed.wrapping_add(0x9000 + t), copies, 48).unwrap();
        let mut samples: Vec<f64> = (0..copies).map(|i| value / es.variate(i)).collect();
        samples.sort_by(|a, b| a.total_cmp(b));
        let mid = samples.len() / 2;
        let median = if samples.len() % 2 == 1 {
            samples[mid]
        } else {
            0.5 * (samples[mid - 1] + samples[mid])
        };
        let est = median * std::f64::consts::LN_2;
        if (est - value).abs() <= eps * value {
            hits += 1;
        }
    }
    let median_hit_frac = hits as f64 / med_trials as f64;

    ExpLawStats {
        max_stability_ks,
        argmax_max_dev,
        heavy_hitter_fail_frac,
        median_hit_frac,
    }
}

pub struct SamplerStats {
    pub tv: f64,
    pub qhat_band_frac: f64,
    pub fail_frac: f64,
    pub max_words: u64,
    pub accepted: u64,
}

pub fn measure_sampler(
    servers: &[ServerVector],
    eps: f64,
    accepted_target: u64,
    seed: u64,
) -> SamplerStats {
    let config = SamplerConfig::new(eps).unwrap();
    let exact = exact_additive_distribution(servers);
    let n = exact.len();
    let mut counts = vec![0u64; n];
    let mut accepted = 0u64;
    let mut runs = 0u64;
    let mut fails = 0u64;
    let mut qhat_in_band = 0u64;
    let mut max_words = 0u64;
    while accepted < accepted_target {
        let (result, stats) = sample_additive_once(servers, &config, seed + runs).unwrap();
        runs += 1;
        max_words = max_words.max(stats.total_words());
        match result.outcome {
            SampleOutcome::Ok { i_hat, q_hat } => {
                counts[i_hat] += 1;
                accepted += 1;
                let q = exact[i_hat];
                if q_hat >= q / 2.0 && q_hat <= 2.0 * q {
                    qhat_in_band += 1;
                }
            }
            SampleOutcome::Fail(_) => fails += 1,
        }
    }
    let empirical: Vec<f64> = counts
        .iter()
        .map(|&c| c as f64 / accepted as f64)
        .collect();
    SamplerStats {
        tv: tv_distance(&empirical, &exact),
        qhat_band_frac: qhat_in_band as f64 / accepted as f64,
        fail_frac: fails as f64 / runs as f64,
        max_words,
        accepted,
    }
}


pub struct EstimatorStats {
    pub seeds: usize,
    pub istar_sampled: usize,
    pub istar_in_pl: usize,
    pub est_quality_hits: usize,
    pub overestimates: usize,
    pub coordinate_checks: usize,
}

/// One protocol copy per seed: round-1 messages, coordinator estimates,
/// comparison against the simulator's ground truth.
pub fn measure_estimator(
    servers: &[ServerVector],
    fn_spec: &FnSpec,
    params: &ProtocolParams,
    seeds: u64,
) -> EstimatorStats {
    let n = servers[0].entries.len();
    let aggregate: Vec<f64> = (0..n)
        .map(|i| servers.iter().map(|s| s.entries[i]).sum::<f64>())
        .collect();
    let mut stats = EstimatorStats {
        seeds: seeds as usize,
        istar_sampled: 0,
        istar_in_pl: 0,
        est_quality_hits: 0,
        overestimates: 0,
        coordinate_checks: 0,
    };
    let one_minus_eps2 = 1.0 - fn_spec.eps2();
    let quality = one_minus_eps2.powi(3) / fn_spec.theta_dblprime;
    for seed in 0..seeds {
        let exps = recover_max_exps(params, seed);
        let msgs: Vec<Round1Msg> = servers
            .iter()
            .map(|s| {
                round1_server_sample(
                    &s.entries,
                    fn_spec,
                    &exps,
                    params.n_samples,
                    seed.wrapping_mul(31).wrapping_add(s.owner as u64),
                )
            })
            .collect();
        let view = CoordinatorView::assemble(params, msgs);
        let estimates = estimate_xhat(&view, fn_spec, params, &exps);

        // Ground truth: i* and the max score over the full instance.
        let (istar, max_score) = (0..n)
            .map(|i| (i, fn_spec.apply(aggregate[i]) / exps.variate(i as u64)))
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();

        let sampled: std::collections::HashSet<u64> =
            view.msgs
                .iter()
                .flat_map(|m| m.sampled.iter().map(|(c, _)| *c))
                .collect();
        if sampled.contains(&(istar as u64)) {
            stats.istar_sampled += 1;
        }
        let pl = select_pl(&estimates, params);
        if pl.contains(&(istar as u64)) {
            stats.istar_in_pl += 1;
        }
        for est in &estimates {
            stats.coordinate_checks += 1;
            let x = aggregate[est.coord as usize];
            if est.xhat > x * (1.0 + 1e-9) + 1e-12 {
                stats.overestimates += 1;
            }
            if est.coord as usize == istar && est.est >= quality * max_score {
                stats.est_quality_hits += 1;
            }
        }
    }
    stats
}

