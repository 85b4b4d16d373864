//! Two-round F_k moment estimation in the coordinator model.
//!
//!     cargo run --release --example fk_moments

use coordsketch::comm::ServerVector;
use coordsketch::fsum::fk_estimate;
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

fn main() {
    let n = 512;
    let s = 8;
    let k = 3.0;
    let eps = 0.15;
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(11);
    let servers: Vec<ServerVector> = (0..s)
        .map(|j| ServerVector {
            owner: j,
            entries: (0..n).map(|_| rng.gen_range(0.0..1.0)).collect(),
        })
        .collect();
    let truth: f64 = (0..n)
        .map(|i| {
            servers
                .iter()
                .map(|sv| sv.entries[i])
                .sum::<f64>()
                .powf(k)
        })
        .sum();

    println!("F_{k} of the aggregate vector: {truth:.3}");
    for seed in 0..5 {
        let (estimate, stats) = fk_estimate(&servers, k, eps, seed).expect("protocol");
        println!(
            "seed {seed}: estimate {estimate:>10.3}  rel err {:.4}  rounds {}  words {}",
            (estimate - truth).abs() / truth,
            stats.rounds_used(),
            stats.total_words()
        );
    }
}
