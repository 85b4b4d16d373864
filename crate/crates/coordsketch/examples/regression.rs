//! lp regression on a sketched instance: the last column is the label.
//!
//!     cargo run --release --example regression

use coordsketch::sketch::{
    create_sketch, lp_regression_cost, solve_regression, Dataset, SketchParams,
};
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

fn gauss(rng: &mut impl Rng) -> f64 {
    let u1: f64 = rng.gen_range(1e-12..1.0);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

fn main() {
    let truth = [1.5, -0.5, 0.75];
    let n = 1200;
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(6);
    let data = Dataset::from_rows(
        4,
        (0..n).map(|i| {
            let feats: Vec<f64> = (0..3).map(|_| gauss(&mut rng)).collect();
            let label: f64 =
                feats.iter().zip(&truth).map(|(f, c)| f * c).sum::<f64>() + 0.2 * gauss(&mut rng);
            let mut row = feats;
            row.push(label);
            (format!("r{i}"), row)
        }),
    )
    .expect("rows");
    let rows = data.matrix();

    for p in [2.0, 1.0] {
        let params = SketchParams::new(0.25, 0.01, p, 31).expect("params");
        let sk = create_sketch(&data, 1, &params).expect("sketch");
        let sol = solve_regression(&sk).expect("solve");
        let cost = lp_regression_cost(&rows, &sol.coef, p);
        println!(
            "p = {p}: coefficients {:?} (planted {truth:?}), full-data cost {cost:.4}",
            sol.coef
                .iter()
                .map(|c| (c * 1000.0).round() / 1000.0)
                .collect::<Vec<_>>()
        );
    }
}
