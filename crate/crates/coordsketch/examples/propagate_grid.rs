//! Delta-round sketch propagation on a grid: every node ends up with a
//! subspace embedding of the data within distance Delta.
//!
//!     cargo run --release --example propagate_grid

use coordsketch::congest::{per_merge_delta, propagate, Graph};
use coordsketch::experiment::generalized_eigen_range;
use coordsketch::sketch::{solve_embedding, Dataset, SketchParams};
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

fn gauss(rng: &mut impl Rng) -> f64 {
    let u1: f64 = rng.gen_range(1e-12..1.0);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

fn main() {
    let (w, h, d) = (4usize, 4usize, 6usize);
    let delta = 2u32;
    let eps = 0.3;
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(13);
    let datasets: Vec<Dataset> = (0..w * h)
        .map(|u| {
            Dataset::from_rows(
                d,
                (0..30).map(|i| {
                    let row: Vec<f64> = (0..d).map(|_| gauss(&mut rng)).collect();
                    (format!("n{u}-{i}"), row)
                }),
            )
            .expect("rows")
        })
        .collect();
    let mut edges = Vec::new();
    for y in 0..h {
        for x in 0..w {
            let u = y * w + x;
            if x + 1 < w {
                edges.push((u, u + 1));
            }
            if y + 1 < h {
                edges.push((u, u + w));
            }
        }
    }
    let graph = Graph::new(datasets, &edges).expect("grid");
    let params =
        SketchParams::new(eps, per_merge_delta(graph.len(), delta), 2.0, 19).expect("params");
    let run = propagate(&graph, delta, &params, delta + 1).expect("propagation");
    println!(
        "{} nodes, delta = {delta}: {} rounds, {} total words, {} salt attempts",
        graph.len(),
        run.stats.rounds_used(),
        run.stats.total_words(),
        run.attempts
    );
    let mut valid = 0;
    for u in 0..graph.len() {
        let union = graph.ball_union(u, delta).expect("conforming");
        let m = solve_embedding(&run.sketches[u]);
        let am = union.matrix();
        let (lo, hi) = generalized_eigen_range(&(m.transpose() * &m), &(am.transpose() * &am));
        if lo >= 1.0 - eps && hi <= 1.0 + eps {
            valid += 1;
        }
    }
    println!("nodes with valid ball embeddings: {valid}/{}", graph.len());
    println!("\nper-node communication (first rounds):");
    for line in run.comm_report().lines().take(9) {
        println!("  {line}");
    }
}
