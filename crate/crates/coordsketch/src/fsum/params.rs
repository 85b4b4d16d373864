//! Derived protocol parameters for the two-round sum estimator.
//!
//! Everything follows from (n, s, the function's growth parameters) and two
//! exposed constants: the heavy-hitter constant C and a multiplier on the
//! per-server sample count whose analysis value hides an O(1).

use super::fnspec::FnSpec;

/// Static parameters computable before any message is sent. Quantities that
/// depend on round-1 totals (the F grid origin and extent) are computed by
/// the coordinator per run from `f_start_coef`.
#[derive(Debug, Clone)]
pub struct ProtocolParams {
    pub n: usize,
    pub s: usize,
    /// Heavy-hitter constant C.
    pub heavy_c: f64,
    /// Multiplier on the analysis sample-count formula.
    pub sample_const: f64,
    /// Per-server sample count N (saturates at u64::MAX).
    pub n_samples: u64,
    /// Formula extents of the probability/total bucket grids.
    pub grid_a: u32,
    pub grid_b: u32,
    /// Probability-grid origin: eps1 / (c_f[s] C ln^2 n).
    pub p_start: f64,
    /// Probability threshold above which a server is Large for a
    /// coordinate: 4 s / (c_f[s] ln^2 n).
    pub large_threshold: f64,
    /// eps1 (1 - eps2) / (4 C s^2); times the observed grand total gives
    /// the F-grid origin below which a server's whole message is ignored.
    pub f_start_coef: f64,
    /// Second-round candidate-set bound (saturating; effectively capped by
    /// the sampled-coordinate count at desk scale).
    pub pl_size: u64,
    /// sqrt(theta): the bucket-grid ratio.
    pub sqrt_theta: f64,
    /// Buckets with upper probability above 4 ln n / N are credited
    /// exactly.
    pub exact_cutoff: f64,
    /// Mark threshold 66 ln n for the probabilistic buckets.
    pub mark_threshold: f64,
    pub ln_n: f64,
}

impl ProtocolParams {
    pub fn derive(fn_spec: &FnSpec, n: usize, s: usize) -> Self {
        Self::derive_with(fn_spec, n, s, 4.0, 1.0)
    }

    pub fn derive_with(
        fn_spec: &FnSpec,
        n: usize,
        s: usize,
        heavy_c: f64,
        sample_const: f64,
    ) -> Self {
        let ln_n = (n.max(2) as f64).ln();
        let eps1 = fn_spec.eps1();
        let one_minus_eps2 = 1.0 - fn_spec.eps2(); // equals eps1
        let theta = fn_spec.theta;
        let cf_s = fn_spec.cf(s as f64);
        let sf = s as f64;

        let grid_a = ((sf / eps1).ln() / theta.ln()).ceil().max(1.0) as u32;
        let grid_b = ((sf * sf / (eps1 * one_minus_eps2)).ln() / theta.ln())
            .ceil()
            .max(1.0) as u32;
        let ab = (grid_a as f64) * (grid_b as f64);

        let n_formula = sample_const * (cf_s / sf) * fn_spec.cf(ab) * ab * theta.sqrt()
            * ln_n.powi(4)
            / (eps1 * one_minus_eps2 * one_minus_eps2);
        let n_samples = if n_formula >= u64::MAX as f64 {
            u64::MAX
        } else {
            (n_formula.ceil() as u64).max(1)
        };

        let p_start = eps1 / (cf_s * heavy_c * ln_n * ln_n);
        let large_threshold = 4.0 * sf / (cf_s * ln_n * ln_n);
        let pl_formula = heavy_c * ln_n * ln_n * fn_spec.theta_dblprime
            / (one_minus_eps2 * one_minus_eps2 * one_minus_eps2);
        let pl_size = if pl_formula >= u64::MAX as f64 {
            u64::MAX
        } else {
            pl_formula.ceil() as u64
        };

        Self {
            n,
            s,
            heavy_c,
            sample_const,
            n_samples,
            grid_a,
            grid_b,
            p_start,
            large_threshold,
            f_start_coef: eps1 * one_minus_eps2 / (4.0 * heavy_c * sf * sf),
            pl_size,
            sqrt_theta: theta.sqrt(),
            exact_cutoff: 4.0 * ln_n / n_samples as f64,
            mark_threshold: 66.0 * ln_n,
            ln_n,
        }
    }

    /// F-grid origin given the observed round-1 grand total.
    pub fn f_start(&self, grand_total: f64) -> f64 {
        self.f_start_coef * grand_total
    }
}
