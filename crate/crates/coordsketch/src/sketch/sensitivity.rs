//! Exact and approximate lp sensitivities.
//!
//! The lp sensitivity of a vector `a` against a matrix `A` is
//! `max_x |<a,x>|^p / ||Ax||_p^p`. For p = 2 this is the leverage score and
//! has the closed form `a^T (A^T A)^+ a`. For general p >= 1 the maximization
//! is equivalent to the convex program `min ||Ax||_p^p subject to <a,x> = 1`,
//! which is solved here by gradient descent in the constraint null space
//! with smoothing continuation for the nonsmooth p <= 2 cases.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SensitivityError {
    #[error("sensitivity undefined: matrix has no nonzero rows")]
    ZeroMatrix,
    #[error("norm order must satisfy p >= 1, got {0}")]
    BadOrder(f64),
    #[error("row index {index} out of range for {rows} rows")]
    RowOutOfRange { index: usize, rows: usize },
}

/// Rank tolerance relative to the largest eigenvalue.
const RANK_RTOL: f64 = 1e-12;

/// Pseudoinverse of the Gram matrix A^T A via symmetric eigendecomposition.
fn gram_pinv(a: &DMatrix<f64>) -> DMatrix<f64> {
    let gram = a.transpose() * a;
    let eig = gram.symmetric_eigen();
    let max_ev = eig.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
    let cut = max_ev * RANK_RTOL;
    let d = eig.eigenvalues.len();
    let mut inv = DMatrix::zeros(d, d);
    for i in 0..d {
        if eig.eigenvalues[i] > cut {
            inv[(i, i)] = 1.0 / eig.eigenvalues[i];
        }
    }
    &eig.eigenvectors * inv * eig.eigenvectors.transpose()
}

/// All l2 leverage scores of `a`, clamped to [0, 1].
pub fn l2_leverage_scores(a: &DMatrix<f64>) -> Result<Vec<f64>, SensitivityError> {
    if a.iter().all(|v| *v == 0.0) {
        return Err(SensitivityError::ZeroMatrix);
    }
    let pinv = gram_pinv(a);
    Ok((0..a.nrows())
        .map(|i| {
            let row = a.row(i).transpose();
            (&pinv * &row).dot(&row).clamp(0.0, 1.0)
        })
        .collect())
}

/// l2 sensitivity of an arbitrary vector `v` against `a`; returns infinity
/// when `v` has a component outside the row space of `a`.
pub fn l2_sensitivity_of(a: &DMatrix<f64>, v: &[f64]) -> Result<f64, SensitivityError> {
    if a.iter().all(|x| *x == 0.0) {
        return Err(SensitivityError::ZeroMatrix);
    }
    let v = DVector::from_column_slice(v);
    if !in_rowspace(a, &v) {
        return Ok(f64::INFINITY);
    }
    let pinv = gram_pinv(a);
    Ok((&pinv * &v).dot(&v).max(0.0))
}

fn in_rowspace(a: &DMatrix<f64>, v: &DVector<f64>) -> bool {
    // Project v onto rowspace(a) through the Gram pseudoinverse.
    let gram_pinv = gram_pinv(a);
    let proj = a.transpose() * (a * (&gram_pinv * v));
    let scale = v.norm().max(1e-300);
    (v - proj).norm() <= 1e-7 * scale
}

/// Reusable l2 sensitivity evaluator: one Gram pseudoinverse, many query
/// vectors. Queries cost O(nd) instead of a fresh eigendecomposition.
pub struct L2Oracle {
    a: DMatrix<f64>,
    pinv: DMatrix<f64>,
}

impl L2Oracle {
    pub fn new(a: DMatrix<f64>) -> Result<Self, SensitivityError> {
        if a.iter().all(|x| *x == 0.0) {
            return Err(SensitivityError::ZeroMatrix);
        }
        let pinv = gram_pinv(&a);
        Ok(Self { a, pinv })
    }

    /// Sensitivity of `v`; infinity when `v` leaves the row space.
    pub fn sensitivity_of(&self, v: &[f64]) -> f64 {
        let v = DVector::from_column_slice(v);
        let pv = &self.pinv * &v;
        let proj = self.a.transpose() * (&self.a * &pv);
        let scale = v.norm().max(1e-300);
        if (&v - proj).norm() > 1e-7 * scale {
            return f64::INFINITY;
        }
        pv.dot(&v).max(0.0)
    }
}

/// lp sensitivity of `v` against `a` for p >= 1, to ~1e-4 relative accuracy
/// for p != 2 (exact closed form at p = 2).
pub fn lp_sensitivity_of(a: &DMatrix<f64>, v: &[f64], p: f64) -> Result<f64, SensitivityError> {
    if !(p >= 1.0) || !p.is_finite() {
        return Err(SensitivityError::BadOrder(p));
    }
    if a.iter().all(|x| *x == 0.0) {
        return Err(SensitivityError::ZeroMatrix);
    }
    if v.iter().all(|x| *x == 0.0) {
        return Ok(0.0);
    }
    if (p - 2.0).abs() < 1e-12 {
        return l2_sensitivity_of(a, v);
    }
    let vv = DVector::from_column_slice(v);
    if !in_rowspace(a, &vv) {
        return Ok(f64::INFINITY);
    }
    let min_norm_p = constrained_min_norm(a, &vv, p);
    if min_norm_p <= 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(1.0 / min_norm_p)
}

/// lp sensitivity of row `index` of `a`; rows of `a` always land in [0, 1].
pub fn lp_sensitivity(a: &DMatrix<f64>, index: usize, p: f64) -> Result<f64, SensitivityError> {
    if index >= a.nrows() {
        return Err(SensitivityError::RowOutOfRange {
            index,
            rows: a.nrows(),
        });
    }
    let row: Vec<f64> = a.row(index).iter().cloned().collect();
    lp_sensitivity_of(a, &row, p).map(|t| t.min(1.0))
}

/// All lp sensitivities of the rows of `a`.
pub fn lp_sensitivities(a: &DMatrix<f64>, p: f64) -> Result<Vec<f64>, SensitivityError> {
    if (p - 2.0).abs() < 1e-12 {
        return l2_leverage_scores(a);
    }
    (0..a.nrows()).map(|i| lp_sensitivity(a, i, p)).collect()
}

/// Solve min ||Ax||_p^p subject to <v, x> = 1.
///
/// Parameterizes x = x0 + Z y with x0 = v/||v||^2 and Z an orthonormal basis
/// of the orthogonal complement of v, then runs damped iteratively
/// reweighted least squares on the smoothed objective
/// sum (r_i^2 + mu^2)^(p/2), tightening mu in stages. Each iteration solves
/// a (d-1)-dimensional weighted normal system, so the per-row cost stays
/// linear in the row count.
fn constrained_min_norm(a: &DMatrix<f64>, v: &DVector<f64>, p: f64) -> f64 {
    let d = a.ncols();
    let x0 = v / v.norm_squared();
    if d == 1 {
        return (a * &x0).iter().map(|r| r.abs().powf(p)).sum();
    }
    // Null-space basis via full QR of [v | I].
    let mut basis = DMatrix::zeros(d, d);
    basis.column_mut(0).copy_from(&(v / v.norm()));
    for j in 1..d {
        basis[(j - 1, j)] = 1.0; // filler columns; orthonormalized below
    }
    let qr = basis.qr();
    let q = qr.q();
    let z = q.columns(1, d - 1).into_owned();

    let r0 = a * &x0; // residual at y = 0
    let az = a * &z;
    let m = d - 1;
    let mut y = DVector::zeros(m);
    let scale = r0.amax().max(1e-300);

    let objective = |r: &DVector<f64>, mu: f64| -> f64 {
        r.iter().map(|ri| (ri * ri + mu * mu).powf(p / 2.0)).sum()
    };

    let mus: Vec<f64> = if (p - 2.0).abs() < 1e-9 {
        vec![0.0]
    } else {
        vec![1e-1 * scale, 1e-4 * scale, 1e-7 * scale, 1e-10 * scale]
    };
    let mut r = &r0 + &az * &y;
    for &mu in &mus {
        let mut best = objective(&r, mu);
        for _iter in 0..40 {
            // Weighted normal equations in the null space.
            let mut gram = DMatrix::zeros(m, m);
            let mut rhs = DVector::zeros(m);
            for i in 0..az.nrows() {
                let w = (r[i] * r[i] + mu * mu).max(1e-300).powf(p / 2.0 - 1.0);
                for c1 in 0..m {
                    let wac1 = w * az[(i, c1)];
                    rhs[c1] -= wac1 * r0[i];
                    for c2 in c1..m {
                        gram[(c1, c2)] += wac1 * az[(i, c2)];
                    }
                }
            }
            for c1 in 0..m {
                for c2 in 0..c1 {
                    gram[(c1, c2)] = gram[(c2, c1)];
                }
            }
            let target = match gram.clone().cholesky() {
                Some(ch) => ch.solve(&rhs),
                None => match gram.svd(true, true).solve(&rhs, 1e-14) {
                    Ok(sol) => sol,
                    Err(_) => break,
                },
            };
            // Damped acceptance toward the IRLS iterate.
            let mut alpha = 1.0;
            let mut improved = false;
            for _ in 0..25 {
                let cand = &y * (1.0 - alpha) + &target * alpha;
                let rc = &r0 + &az * &cand;
                let fc = objective(&rc, mu);
                if fc <= best {
                    let gain = best - fc;
                    y = cand;
                    r = rc;
                    improved = gain > 1e-12 * best.max(1e-300);
                    best = fc;
                    break;
                }
                alpha *= 0.5;
            }
            if !improved {
                break;
            }
        }
    }
    r.iter().map(|ri| ri.abs().powf(p)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_xoshiro::Xoshiro256PlusPlus;

    fn random_matrix(rng: &mut impl Rng, n: usize, d: usize) -> DMatrix<f64> {
        DMatrix::from_fn(n, d, |_, _| rng.gen_range(-1.0..1.0))
    }

    #[test]
    fn identity_rows_have_unit_sensitivity() {
        let eye = DMatrix::<f64>::identity(4, 4);
        for p in [1.0, 2.0, 3.0] {
            for i in 0..4 {
                let t = lp_sensitivity(&eye, i, p).unwrap();
                assert!((t - 1.0).abs() < 1e-6, "p={p} row {i}: {t}");
            }
        }
    }

    #[test]
    fn l2_matches_gram_pseudoinverse_oracle() {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(8);
        let a = random_matrix(&mut rng, 10, 3);
        let scores = l2_leverage_scores(&a).unwrap();
        // Oracle: tau_i = a_i (A^T A)^-1 a_i^T via direct inversion.
        let gram = a.transpose() * &a;
        let inv = gram.try_inverse().unwrap();
        for i in 0..10 {
            let row = a.row(i).transpose();
            let oracle = (&inv * &row).dot(&row);
            assert!(
                (scores[i] - oracle).abs() < 1e-8,
                "row {i}: {} vs {oracle}",
                scores[i]
            );
        }
        // Leverage scores of a full-rank matrix sum to the rank.
        let sum: f64 = scores.iter().sum();
        assert!((sum - 3.0).abs() < 1e-8);
    }

    #[test]
    fn general_p_agrees_with_closed_form_at_two() {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(9);
        let a = random_matrix(&mut rng, 12, 3);
        let l2 = l2_leverage_scores(&a).unwrap();
        for i in 0..12 {
            let row: Vec<f64> = a.row(i).iter().cloned().collect();
            // Run the iterative path at p = 2.000001 against the closed form.
            let t = lp_sensitivity_of(&a, &row, 2.000001).unwrap();
            assert!(
                (t - l2[i]).abs() < 1e-3 * l2[i].max(1e-3),
                "row {i}: iterative {t} vs closed {l2}",
                l2 = l2[i]
            );
        }
    }

    #[test]
    fn p3_sensitivity_sum_is_bounded_by_d_to_the_p_half() {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(10);
        let a = random_matrix(&mut rng, 20, 3);
        let taus = lp_sensitivities(&a, 3.0).unwrap();
        let sum: f64 = taus.iter().sum();
        let bound = 3f64.powf(1.5);
        assert!(sum <= bound * (1.0 + 1e-6), "sum {sum} > {bound}");
        assert!(taus.iter().all(|t| (0.0..=1.0).contains(t)));
    }

    #[test]
    fn monotone_under_row_addition() {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(11);
        let a = random_matrix(&mut rng, 8, 3);
        let b = random_matrix(&mut rng, 6, 3);
        let stacked = DMatrix::from_fn(14, 3, |i, j| {
            if i < 8 {
                a[(i, j)]
            } else {
                b[(i - 8, j)]
            }
        });
        for p in [1.5, 2.0, 3.0] {
            let t_small = lp_sensitivities(&a, p).unwrap();
            for i in 0..8 {
                let row: Vec<f64> = a.row(i).iter().cloned().collect();
                let t_big = lp_sensitivity_of(&stacked, &row, p).unwrap();
                assert!(
                    t_big <= t_small[i] * (1.0 + 1e-3) + 1e-9,
                    "p={p} row {i}: union {t_big} > own {t}",
                    t = t_small[i]
                );
            }
        }
    }

    #[test]
    fn zero_matrix_and_bad_order_are_rejected() {
        let z = DMatrix::<f64>::zeros(3, 2);
        assert_eq!(
            l2_leverage_scores(&z).unwrap_err(),
            SensitivityError::ZeroMatrix
        );
        let a = DMatrix::<f64>::identity(2, 2);
        assert!(matches!(
            lp_sensitivity_of(&a, &[1.0, 0.0], 0.5),
            Err(SensitivityError::BadOrder(_))
        ));
    }

    #[test]
    fn out_of_rowspace_vector_has_infinite_sensitivity() {
        // A spans only the first coordinate.
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 2.0, 0.0]);
        let t = l2_sensitivity_of(&a, &[0.0, 1.0]).unwrap();
        assert!(t.is_infinite());
        let t3 = lp_sensitivity_of(&a, &[0.0, 1.0], 3.0).unwrap();
        assert!(t3.is_infinite());
    }
}
