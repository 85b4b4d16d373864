//! Higher-order correlation estimation over implicit tuple vectors.
//!
//! Three servers hold small sets of nonnegative vectors; the protocol
//! estimates sum over distinct index pairs (i, j) of f(sum of g over the
//! vectors) without ever materializing the n^2 tuple space.
//!
//!     cargo run --release --example higher_order

use coordsketch::fsum::{higher_order_correlation, hoc_bruteforce, FnSpec};
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

fn main() {
    let n = 10;
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(3);
    let servers: Vec<Vec<Vec<f64>>> = (0..3)
        .map(|_| {
            (0..3)
                .map(|_| (0..n).map(|_| rng.gen_range(0.0..1.0)).collect())
                .collect()
        })
        .collect();
    let f = FnSpec::power(2.0).expect("valid exponent");
    let g = |v: &[f64]| v[0] * v[1];
    let truth = hoc_bruteforce(&servers, &f, &g, 2);
    println!("M(f = x^2, g = product) by enumeration: {truth:.4}");
    for seed in 0..5 {
        let out = higher_order_correlation(&servers, &f, &g, 2, 0.2, seed).expect("protocol");
        println!(
            "seed {seed}: estimate {:>9.4}  rel err {:.4}  peak tuple records {}",
            out.estimate,
            (out.estimate - truth).abs() / truth,
            out.peak_tuple_records
        );
    }
}
