//! Sketched Frobenius-norm low-rank approximation.
//!
//! Compress columns with a random sign matrix (d x m, m = O(k log(1/delta)
//! / eps)), leverage-sample the rows of the compressed matrix while
//! carrying the paired original rows, and solve the rank-constrained
//! regression in the sampled space. The sampled sketch has O(m polylog)
//! rows regardless of the dataset size, which is what makes the route
//! propagation-friendly.

use super::dataset::Dataset;
use super::sensitivity::{l2_leverage_scores, SensitivityError};
use crate::randomness::{prf64, uniform_hash};
use nalgebra::DMatrix;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum LraError {
    #[error("rank k must satisfy 1 <= k <= d, got k = {k}, d = {d}")]
    BadRank { k: usize, d: usize },
    #[error("lra parameters out of range: {0}")]
    BadParams(String),
    #[error(transparent)]
    Sensitivity(#[from] SensitivityError),
}

#[derive(Debug, Clone)]
pub struct LraConfig {
    pub eps: f64,
    pub delta: f64,
    /// Multiplier on the sign-matrix width formula.
    pub width_const: f64,
    /// Multiplier on the leverage-sampling probabilities.
    pub sample_const: f64,
}

impl LraConfig {
    pub fn new(eps: f64, delta: f64) -> Result<Self, LraError> {
        if !(eps > 0.0 && eps < 1.0) || !(delta > 0.0 && delta < 1.0) {
            return Err(LraError::BadParams(format!("eps {eps}, delta {delta}")));
        }
        Ok(Self {
            eps,
            delta,
            width_const: 1.0,
            sample_const: 0.2,
        })
    }

    /// Sign-matrix width m.
    pub fn width(&self, k: usize) -> usize {
        ((self.width_const * k as f64 * (1.0 / self.delta).ln() / self.eps).ceil() as usize).max(k)
    }
}

#[derive(Debug, Clone)]
pub struct LraResult {
    /// Orthonormal basis (d x r, r <= k) of the recovered row subspace.
    pub basis: DMatrix<f64>,
    /// Rows retained by the leverage sample of the compressed matrix.
    pub sketch_rows: usize,
    /// Sign-matrix width actually used.
    pub width: usize,
}

/// Residual ||A (I - V V^T)||_F^2 of a dataset against a candidate basis.
pub fn lra_residual_sq(data: &Dataset, basis: &DMatrix<f64>) -> f64 {
    let a = data.matrix();
    let proj = &a * basis * basis.transpose();
    (a - proj).norm_squared()
}

/// Best rank-k truncation of a matrix (Frobenius-optimal).
fn truncate_rank(m: &DMatrix<f64>, k: usize) -> DMatrix<f64> {
    let svd = m.clone().svd(true, true);
    let u = svd.u.as_ref().expect("u");
    let vt = svd.v_t.as_ref().expect("v_t");
    let r = k.min(svd.singular_values.len());
    let mut out = DMatrix::zeros(m.nrows(), m.ncols());
    for i in 0..r {
        let s = svd.singular_values[i];
        if s <= 0.0 {
            break;
        }
        let ui = u.column(i);
        let vi = vt.row(i);
        out += (ui * vi) * s;
    }
    out
}

pub fn solve_lra(
    data: &Dataset,
    k: usize,
    eps: f64,
    delta: f64,
    seed: u64,
) -> Result<LraResult, LraError> {
    solve_lra_with(data, k, &LraConfig::new(eps, delta)?, seed)
}

pub fn solve_lra_with(
    data: &Dataset,
    k: usize,
    config: &LraConfig,
    seed: u64,
) -> Result<LraResult, LraError> {
    let d = data.d();
    if k < 1 || k > d {
        return Err(LraError::BadRank { k, d });
    }
    let a = data.matrix();
    let m = config.width(k);

    // Random sign compression of the columns.
    let signs = DMatrix::from_fn(d, m, |i, j| {
        if prf64(seed, 0x519, (i as u64) << 32 | j as u64) & 1 == 1 {
            1.0
        } else {
            -1.0
        }
    });
    let compressed = &a * &signs; // n x m

    // Leverage sample of the compressed rows, dragging the original rows
    // along. The same key set as the dataset keeps the sample shareable.
    let taus = l2_leverage_scores(&compressed)?;
    let oversample = ((m.max(2) as f64) / config.eps).ln() + (1.0 / config.delta).ln();
    let mut kept_rows: Vec<(usize, f64)> = Vec::new();
    for (i, key) in data.keys().enumerate() {
        let p = config.sample_const * taus[i] * oversample / (config.eps * config.eps);
        if uniform_hash(key.as_bytes(), seed ^ 0x17a, 1) <= p {
            kept_rows.push((i, (1.0 / p.min(1.0)).sqrt()));
        }
    }
    if kept_rows.is_empty() {
        // Degenerate fall-back: keep everything unweighted.
        kept_rows = (0..a.nrows()).map(|i| (i, 1.0)).collect();
    }

    let rows = kept_rows.len();
    let mut lb = DMatrix::zeros(rows, m); // L * (A R)
    let mut la = DMatrix::zeros(rows, d); // L * A
    for (r, (i, w)) in kept_rows.iter().enumerate() {
        for c in 0..m {
            lb[(r, c)] = w * compressed[(*i, c)];
        }
        for c in 0..d {
            la[(r, c)] = w * a[(*i, c)];
        }
    }

    // min over rank-k X of ||LB X - LA||_F: project LA onto col(LB), take
    // the best rank-k part of the projection, and pull back through LB.
    let qr = lb.clone().qr();
    let q = qr.q(); // rows x min(rows, m)
    let projected = &q * (q.transpose() * &la);
    let best = truncate_rank(&projected, k);
    let lb_svd = lb.svd(true, true);
    let x_tilde = lb_svd.solve(&best, 1e-12).expect("svd solve"); // m x d

    // The output subspace is the row space of R X~.
    let rx = &signs * &x_tilde; // d x d, rank <= k
    let svd = rx.transpose().svd(true, true);
    let u = svd.u.as_ref().expect("u");
    let max_sv = svd.singular_values.iter().cloned().fold(0.0f64, f64::max);
    let r_eff = svd
        .singular_values
        .iter()
        .take(k)
        .filter(|s| **s > max_sv * 1e-10)
        .count()
        .max(1);
    let basis = u.columns(0, r_eff.min(u.ncols())).into_owned();

    Ok(LraResult {
        basis,
        sketch_rows: rows,
        width: m,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_xoshiro::Xoshiro256PlusPlus;

    fn low_rank_dataset(
        n: usize,
        d: usize,
        rank: usize,
        noise: f64,
        rng: &mut impl Rng,
    ) -> Dataset {
        let factors: Vec<Vec<f64>> = (0..rank)
            .map(|_| (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        Dataset::from_rows(
            d,
            (0..n).map(|i| {
                let mut row = vec![0.0; d];
                for f in &factors {
                    let c: f64 = rng.gen_range(-1.0..1.0);
                    for (slot, v) in row.iter_mut().zip(f) {
                        *slot += c * v;
                    }
                }
                for slot in row.iter_mut() {
                    *slot += noise * rng.gen_range(-1.0..1.0);
                }
                (format!("r{i}"), row)
            }),
        )
        .unwrap()
    }

    #[test]
    fn exact_low_rank_input_has_zero_residual() {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(31);
        let data = low_rank_dataset(60, 10, 3, 0.0, &mut rng);
        let res = solve_lra(&data, 3, 0.25, 0.5, 7).unwrap();
        let resid = lra_residual_sq(&data, &res.basis);
        assert!(resid < 1e-16 * data.matrix().norm_squared().max(1.0), "residual {resid}");
    }

    #[test]
    fn rank_bounds_are_enforced() {
        let data = low_rank_dataset(10, 4, 2, 0.0, &mut Xoshiro256PlusPlus::seed_from_u64(1));
        assert!(matches!(
            solve_lra(&data, 0, 0.25, 0.5, 1),
            Err(LraError::BadRank { .. })
        ));
        assert!(matches!(
            solve_lra(&data, 5, 0.25, 0.5, 1),
            Err(LraError::BadRank { .. })
        ));
    }

    #[test]
    fn truncation_is_frobenius_optimal_on_diagonal() {
        let m = DMatrix::from_diagonal(&nalgebra::DVector::from_row_slice(&[3.0, 2.0, 1.0]));
        let t = truncate_rank(&m, 2);
        let expect = DMatrix::from_diagonal(&nalgebra::DVector::from_row_slice(&[3.0, 2.0, 0.0]));
        assert!((t - expect).norm() < 1e-12);
    }
}
