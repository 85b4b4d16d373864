//! One-round sampling from an additively-defined distribution.
//!
//! Four servers hold nonnegative vectors; the coordinator draws a
//! coordinate with probability proportional to the aggregate entry and
//! estimates that probability in the same round. Run with:
//!
//!     cargo run --release --example additive_sampling

use coordsketch::comm::ServerVector;
use coordsketch::sampler::sample_additive;
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

fn main() {
    let n = 32;
    let s = 4;
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(7);
    let servers: Vec<ServerVector> = (0..s)
        .map(|j| ServerVector {
            owner: j,
            entries: (0..n).map(|_| rng.gen_range(0.0..1.0)).collect(),
        })
        .collect();

    // Exact target distribution, for comparison.
    let mut q = vec![0.0f64; n];
    for server in &servers {
        for (i, v) in server.entries.iter().enumerate() {
            q[i] += v;
        }
    }
    let total: f64 = q.iter().sum();

    println!("coordinate  exact_prob  sampled  q_hat");
    let mut counts = vec![0u32; n];
    let trials = 400;
    let mut q_hats = vec![Vec::new(); n];
    for seed in 0..trials {
        let sampled = sample_additive(&servers, 0.1, seed).expect("sampler");
        counts[sampled.i_hat] += 1;
        q_hats[sampled.i_hat].push(sampled.q_hat);
    }
    for i in 0..n {
        let mean_qhat = if q_hats[i].is_empty() {
            f64::NAN
        } else {
            q_hats[i].iter().sum::<f64>() / q_hats[i].len() as f64
        };
        println!(
            "{i:>10}  {:>10.4}  {:>7}  {mean_qhat:.4}",
            q[i] / total,
            counts[i]
        );
    }
}
