//! Two-round sum protocol: estimator guarantees against ground truth,
//! end-to-end accuracy, and communication scaling.

mod common;

use common::{direct_fsum, measure_estimator, random_instance};
use coordsketch::comm::ServerVector;
use coordsketch::fsum::{
    fk_estimate, fsum_estimate, recover_max, recover_max_exps, FnSpec, ProtocolParams,
};
use coordsketch::sampler::weighted::multinomial_counts;
use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;

#[test]
fn round1_sampling_frequencies_match_exact_distribution() {
    // Per-draw frequencies over 10^5 draws vs the exact normalized
    // distribution f(x_i)/e_i.
    let sq = FnSpec::power(2.0).unwrap();
    let params = ProtocolParams::derive(&sq, 16, 1);
    let exps = recover_max_exps(&params, 3);
    let servers = random_instance(8, 16, 1);
    let weights: Vec<f64> = (0..16)
        .map(|i| sq.apply(servers[0].entries[i]) / exps.variate(i as u64))
        .collect();
    let total: f64 = weights.iter().sum();
    let draws = 100_000u64;
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(77);
    let counts = multinomial_counts(&weights, draws, &mut rng);
    let mut freq = vec![0.0; 16];
    for (i, c) in counts {
        freq[i] = c as f64 / draws as f64;
    }
    let max_dev = (0..16)
        .map(|i| (freq[i] - weights[i] / total).abs())
        .fold(0.0f64, f64::max);
    assert!(max_dev <= 0.01, "max deviation {max_dev}");
}

#[test]
fn estimator_guarantees_on_the_square_suite() {
    // n = 256, s = 8, f = x^2: underestimation, i* capture, PL capture,
    // and the Est quality floor.
    let servers = random_instance(21, 256, 8);
    let sq = FnSpec::power(2.0).unwrap();
    let params = ProtocolParams::derive(&sq, 256, 8);
    let stats = measure_estimator(&servers, &sq, &params, 50);
    assert!(
        stats.overestimates as f64 <= 0.01 * stats.coordinate_checks as f64,
        "{} overestimates in {} checks",
        stats.overestimates,
        stats.coordinate_checks
    );
    assert!(
        stats.istar_sampled * 100 >= stats.seeds * 99,
        "i* sampled in only {}/{} seeds",
        stats.istar_sampled,
        stats.seeds
    );
    assert!(
        stats.istar_in_pl * 100 >= stats.seeds * 98,
        "i* in PL in only {}/{} seeds",
        stats.istar_in_pl,
        stats.seeds
    );
    assert!(
        stats.est_quality_hits * 100 >= stats.seeds * 98,
        "Est quality floor hit in only {}/{} seeds",
        stats.est_quality_hits,
        stats.seeds
    );
}

#[test]
fn recover_max_matches_ground_truth() {
    let servers = random_instance(33, 256, 8);
    let cube = FnSpec::power(3.0).unwrap();
    let params = ProtocolParams::derive(&cube, 256, 8);
    let aggregate: Vec<f64> = (0..256)
        .map(|i| servers.iter().map(|s| s.entries[i]).sum::<f64>())
        .collect();
    let mut exact = 0usize;
    let mut max_kappa = 0.0f64;
    for seed in 0..100u64 {
        let (got, stats) = recover_max(&servers, &cube, &params, seed).unwrap();
        let exps = recover_max_exps(&params, seed);
        let truth = (0..256)
            .map(|i| cube.apply(aggregate[i]) / exps.variate(i as u64))
            .fold(0.0f64, f64::max);
        if (got - truth).abs() <= 1e-9 * truth {
            exact += 1;
        }
        assert_eq!(stats.rounds_used(), 2);
        // Communication against the analysis shape, with the candidate set
        // capped by the sampled universe.
        let ln_n = 256f64.ln();
        let pl_eff = (params.pl_size as f64).min(256.0);
        let shape = cube.cf(8.0) * ln_n.powi(4) + 8.0 * pl_eff;
        max_kappa = max_kappa.max(stats.total_words() as f64 / shape);
    }
    println!("recover_max kappa_obs = {max_kappa:.3}");
    assert!(exact >= 95, "exact recovery in only {exact}/100 seeds");
    assert!(max_kappa <= 4.0, "kappa {max_kappa} above the pinned 4.0");
}

#[test]
fn fsum_huber_meets_accuracy_band() {
    let servers = random_instance(5, 512, 8);
    let hub = FnSpec::huber(1.0).unwrap();
    let eps = 0.15;
    let truth = direct_fsum(&servers, |x| {
        if x <= 1.0 {
            x * x / 2.0
        } else {
            x - 0.5
        }
    });
    let mut hits = 0;
    for seed in 0..50u64 {
        let (est, stats) = fsum_estimate(&servers, &hub, eps, seed).unwrap();
        assert_eq!(stats.rounds_used(), 2);
        if (est - truth).abs() <= eps * truth {
            hits += 1;
        }
    }
    assert!(hits >= 40, "huber within band in only {hits}/50 trials");
}

#[test]
fn fk_all_ones_f2_is_the_count() {
    // x = all ones split arbitrarily across servers: F_2 = n exactly.
    let n = 100usize;
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(3);
    let mut a = vec![0.0; n];
    let mut b = vec![0.0; n];
    for i in 0..n {
        let split: f64 = rand::Rng::gen_range(&mut rng, 0.0..1.0);
        a[i] = split;
        b[i] = 1.0 - split;
    }
    let servers = vec![
        ServerVector { owner: 0, entries: a },
        ServerVector { owner: 1, entries: b },
    ];
    let eps = 0.2;
    let mut hits = 0;
    for seed in 0..20u64 {
        let (est, _) = fk_estimate(&servers, 2.0, eps, seed).unwrap();
        if (est - 100.0).abs() <= eps * 100.0 {
            hits += 1;
        }
    }
    assert!(hits >= 18, "F2 of all-ones within band in only {hits}/20");
}

#[test]
fn fk_cube_matches_direct_computation() {
    let servers = random_instance(9, 128, 4);
    let truth = direct_fsum(&servers, |x| x * x * x);
    let eps = 0.2;
    let mut hits = 0;
    for seed in 0..25u64 {
        let (est, _) = fk_estimate(&servers, 3.0, eps, seed).unwrap();
        if (est - truth).abs() <= eps * truth {
            hits += 1;
        }
    }
    assert!(hits >= 20, "k=3 within band in only {hits}/25 trials");
}

#[test]
fn communication_grows_within_the_fk_slope_bound() {
    // Doubling s multiplies total words by at most 2^(k-1) * 3 at fixed
    // eps (k = 3).
    let eps = 0.25;
    let n = 256usize;
    let mut means = Vec::new();
    for &s in &[4usize, 8, 16] {
        let servers = random_instance(100 + s as u64, n, s);
        let mut total = 0u64;
        let trials = 3u64;
        for seed in 0..trials {
            let (_, stats) = fk_estimate(&servers, 3.0, eps, seed).unwrap();
            total += stats.total_words();
        }
        means.push(total as f64 / trials as f64);
    }
    let slope_bound = 2f64.powi(2) * 3.0;
    for pair in means.windows(2) {
        let ratio = pair[1] / pair[0];
        println!("fk words ratio per doubling: {ratio:.3}");
        assert!(
            ratio <= slope_bound,
            "ratio {ratio} above the 2^(k-1)*3 = {slope_bound} bound"
        );
    }
}
