//! Entrywise Huber-loss sum estimation: the same two-round protocol with a
//! robust loss plugged in.
//!
//!     cargo run --release --example huber_sum

use coordsketch::comm::ServerVector;
use coordsketch::fsum::{fsum_estimate, FnSpec};
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

fn main() {
    let n = 256;
    let s = 6;
    let tau = 1.0;
    let eps = 0.2;
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(5);
    let servers: Vec<ServerVector> = (0..s)
        .map(|j| ServerVector {
            owner: j,
            // A few heavy coordinates so both Huber branches matter.
            entries: (0..n)
                .map(|i| {
                    if i % 19 == 0 {
                        rng.gen_range(1.0..4.0)
                    } else {
                        rng.gen_range(0.0..0.3)
                    }
                })
                .collect(),
        })
        .collect();

    let huber = FnSpec::huber(tau).expect("valid width");
    let truth: f64 = (0..n)
        .map(|i| {
            let x: f64 = servers.iter().map(|sv| sv.entries[i]).sum();
            huber.apply(x)
        })
        .sum();

    println!("Huber(tau = {tau}) sum of the aggregate: {truth:.4}");
    for seed in 0..5 {
        let (estimate, stats) = fsum_estimate(&servers, &huber, eps, seed).expect("protocol");
        println!(
            "seed {seed}: estimate {estimate:>9.4}  rel err {:.4}  words {}",
            (estimate - truth).abs() / truth,
            stats.total_words()
        );
    }
}
