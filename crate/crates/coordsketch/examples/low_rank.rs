//! Sketched Frobenius low-rank approximation vs the SVD optimum.
//!
//!     cargo run --release --example low_rank

use coordsketch::sketch::{lra_residual_sq, solve_lra, Dataset, SketchParams};
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

fn gauss(rng: &mut impl Rng) -> f64 {
    let u1: f64 = rng.gen_range(1e-12..1.0);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

fn main() {
    let _ = SketchParams::new(0.25, 0.5, 2.0, 0); // shared parameter shape
    let (n, d, rank) = (200, 30, 5);
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(8);
    let factors: Vec<Vec<f64>> = (0..rank)
        .map(|_| (0..d).map(|_| gauss(&mut rng)).collect())
        .collect();
    let data = Dataset::from_rows(
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
                *slot += 0.01 * gauss(&mut rng);
            }
            (format!("r{i}"), row)
        }),
    )
    .expect("rows");

    let a = data.matrix();
    let optimal: f64 = a
        .clone()
        .svd(false, false)
        .singular_values
        .iter()
        .skip(rank)
        .map(|s| s * s)
        .sum();
    println!("rank-{rank} SVD-optimal residual: {optimal:.6}");
    for seed in 0..5 {
        let res = solve_lra(&data, rank, 0.25, 0.5, seed).expect("lra");
        let resid = lra_residual_sq(&data, &res.basis);
        println!(
            "seed {seed}: residual {resid:.6} (ratio {:.4}), sketch rows {}, sign width {}",
            resid / optimal,
            res.sketch_rows,
            res.width
        );
    }
}
