//! Composable-sketch merging with duplicate insensitivity.
//!
//! Two datasets share half their keys; the merged sketch embeds the
//! deduplicated union, not the multiset sum.
//!
//!     cargo run --release --example merge_dedup

use coordsketch::experiment::generalized_eigen_range;
use coordsketch::sketch::{create_sketch, merge_sketches, solve_embedding, Dataset, SketchParams};
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

fn gauss(rng: &mut impl Rng) -> f64 {
    let u1: f64 = rng.gen_range(1e-12..1.0);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

fn main() {
    let d = 8;
    let n = 600;
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(9);
    let rows: Vec<(String, Vec<f64>)> = (0..n + n / 2)
        .map(|i| {
            let row: Vec<f64> = (0..d).map(|_| gauss(&mut rng)).collect();
            (format!("k{i}"), row)
        })
        .collect();
    let a = Dataset::from_rows(d, rows[..n].iter().cloned()).expect("a");
    let b = Dataset::from_rows(d, rows[n / 2..].iter().cloned()).expect("b");
    let union = a.union(&b).expect("conforming");
    println!(
        "datasets: |A| = {}, |B| = {}, |A union B| = {} (overlap deduplicated)",
        a.len(),
        b.len(),
        union.len()
    );

    let eps = 0.25;
    let params = SketchParams::new(eps, 0.01, 2.0, 42)
        .expect("params")
        .with_sample_const(0.5);
    let ska = create_sketch(&a, 2, &params).expect("sketch A");
    let skb = create_sketch(&b, 2, &params).expect("sketch B");
    println!(
        "sketch A: {} entries, budget t = {}; sketch B: {} entries",
        ska.total_entries(),
        ska.t,
        skb.total_entries()
    );
    let merged = merge_sketches(&[ska, skb]).expect("merge");
    println!(
        "merged: {} entries, budget t = {}, gamma ledger {:.4}",
        merged.total_entries(),
        merged.t,
        merged.gamma
    );

    let m = solve_embedding(&merged);
    let um = union.matrix();
    let (lo, hi) = generalized_eigen_range(&(m.transpose() * &m), &(um.transpose() * &um));
    println!(
        "merged embedding vs deduplicated union: eigenvalues in [{lo:.4}, {hi:.4}] (target [{:.2}, {:.2}])",
        1.0 - eps,
        1.0 + eps
    );
}
