//! lp regression on sketched embeddings.
//!
//! Rows are (features | label); solving on the weighted embedding of a
//! sketch gives a coefficient vector whose cost on the full data is within
//! 1 + O(eps) of optimal whenever the embedding preserved the column space.

use super::sketch::{solve_embedding, Sketch};
use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum RegressionError {
    #[error("regression needs d >= 2 (features plus a label column), got d = {0}")]
    TooFewColumns(usize),
    #[error("empty embedding: nothing to regress on")]
    EmptyEmbedding,
}

#[derive(Debug, Clone)]
pub struct RegressionSolution {
    pub coef: Vec<f64>,
    /// Set when the feature block was rank-deficient and the minimum-norm
    /// solution was returned.
    pub rank_deficient: bool,
}

/// Minimum-norm least squares via SVD; flags rank deficiency.
fn lstsq(a: &DMatrix<f64>, b: &DVector<f64>) -> (DVector<f64>, bool) {
    let svd = a.clone().svd(true, true);
    let max_sv = svd.singular_values.iter().cloned().fold(0.0f64, f64::max);
    let cut = max_sv * 1e-12;
    let rank = svd.singular_values.iter().filter(|s| **s > cut).count();
    let sol = svd.solve(b, cut.max(f64::MIN_POSITIVE)).expect("svd solve");
    (sol, rank < a.ncols())
}

/// Iteratively reweighted least squares for min ||Ax - b||_p, p >= 1.
/// Smoothed weights keep the p < 2 iterations stable; for p > 2 the update
/// is damped by halving steps until the cost does not increase.
fn irls_lp(a: &DMatrix<f64>, b: &DVector<f64>, p: f64) -> (DVector<f64>, bool) {
    let (mut x, rank_deficient) = lstsq(a, b);
    if (p - 2.0).abs() < 1e-12 {
        return (x, rank_deficient);
    }
    let scale = b.amax().max(1e-12);
    let mut mu = 1e-3 * scale;
    let cost = |x: &DVector<f64>| -> f64 {
        (a * x - b).iter().map(|r| r.abs().powf(p)).sum::<f64>()
    };
    let mut best = cost(&x);
    for outer in 0..12 {
        for _ in 0..60 {
            let r = a * &x - b;
            // Weighted normal equations: w_i = (r_i^2 + mu^2)^{(p-2)/2}.
            let w: Vec<f64> = r
                .iter()
                .map(|ri| (ri * ri + mu * mu).powf((p - 2.0) / 2.0))
                .collect();
            let mut wa = a.clone();
            let mut wb = b.clone();
            for i in 0..wa.nrows() {
                let s = w[i].sqrt();
                for j in 0..wa.ncols() {
                    wa[(i, j)] *= s;
                }
                wb[i] *= s;
            }
            let (next, _) = lstsq(&wa, &wb);
            // Damped acceptance.
            let mut step = 1.0;
            let mut accepted = false;
            for _ in 0..20 {
                let cand = &x * (1.0 - step) + &next * step;
                let c = cost(&cand);
                if c <= best * (1.0 + 1e-12) {
                    if (best - c).abs() <= 1e-12 * best.max(1e-300) {
                        x = cand;
                        best = c;
                        accepted = false; // converged at this smoothing level
                    } else {
                        x = cand;
                        best = c;
                        accepted = true;
                    }
                    break;
                }
                step *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        mu *= 1e-1;
        if mu < 1e-14 * scale {
            break;
        }
        let _ = outer;
    }
    (x, rank_deficient)
}

/// Solve the lp regression encoded by a sketch over (features | label)
/// rows: argmin over the weighted embedding of ||M [x; -1]||_p.
pub fn solve_regression(sk: &Sketch) -> Result<RegressionSolution, RegressionError> {
    if sk.d < 2 {
        return Err(RegressionError::TooFewColumns(sk.d));
    }
    let m = solve_embedding(sk);
    if m.nrows() == 0 {
        return Err(RegressionError::EmptyEmbedding);
    }
    let d = sk.d;
    let features = m.columns(0, d - 1).into_owned();
    let labels = m.column(d - 1).into_owned();
    let (coef, rank_deficient) = irls_lp(&features, &labels, sk.params.p);
    Ok(RegressionSolution {
        coef: coef.iter().cloned().collect(),
        rank_deficient,
    })
}

/// Cost ||A [x; -1]||_p^p of a coefficient vector on raw (features | label)
/// rows.
pub fn lp_regression_cost(rows: &DMatrix<f64>, coef: &[f64], p: f64) -> f64 {
    let d = rows.ncols();
    let mut total = 0.0;
    for i in 0..rows.nrows() {
        let mut r = -rows[(i, d - 1)];
        for j in 0..d - 1 {
            r += rows[(i, j)] * coef[j];
        }
        total += r.abs().powf(p);
    }
    total
}
