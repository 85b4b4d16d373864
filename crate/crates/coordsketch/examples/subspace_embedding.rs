//! lp-sensitivity sampling: build a sketch, solve it into a subspace
//! embedding, and check the distortion against the exact Gram matrix.
//!
//!     cargo run --release --example subspace_embedding

use coordsketch::experiment::generalized_eigen_range;
use coordsketch::sketch::{create_sketch, solve_embedding, Dataset, SketchParams};
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

fn gauss(rng: &mut impl Rng) -> f64 {
    let u1: f64 = rng.gen_range(1e-12..1.0);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

fn main() {
    let n = 1500;
    let d = 10;
    let eps = 0.25;
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(2);
    let data = Dataset::from_rows(
        d,
        (0..n).map(|i| {
            let row: Vec<f64> = (0..d).map(|_| gauss(&mut rng)).collect();
            (format!("row{i}"), row)
        }),
    )
    .expect("fresh keys");
    let a = data.matrix();
    let gram_a = a.transpose() * &a;

    for salt in 0..5u64 {
        let params = SketchParams::new(eps, 0.01, 2.0, salt).expect("params");
        let sk = create_sketch(&data, 2, &params).expect("sketch");
        let m = solve_embedding(&sk);
        let gram_m = m.transpose() * &m;
        let (lo, hi) = generalized_eigen_range(&gram_m, &gram_a);
        println!(
            "salt {salt}: {} of {n} rows kept, generalized eigenvalues in [{lo:.4}, {hi:.4}] (target [{:.2}, {:.2}])",
            m.nrows(),
            1.0 - eps,
            1.0 + eps
        );
    }
}
