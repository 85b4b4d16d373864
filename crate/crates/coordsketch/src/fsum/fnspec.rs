//! Pluggable nonnegative functions with approximate-invertibility
//! parameters.
//!
//! A registered function carries its inverse, the growth parameters
//! (theta, theta', theta'') and an evaluator for the split constant c_f[s],
//! the smallest number with
//! `f(y_1+..+y_s) <= (c_f[s]/s) * (sqrt(f(y_1))+..+sqrt(f(y_s)))^2`.
//! Protocol sample counts and bucket grids are all derived from these.
//!
//! Note on the third growth property: the parameter values shipped for
//! `x^k` (theta'' = 2 * 8^(k/2)) are only consistent with reading the
//! shrink factor as `y * sqrt(theta) * theta' / 4`, and that is the form
//! validated here and used throughout.

use std::fmt;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum FnSpecError {
    #[error("power exponent must be >= 1, got {0}")]
    BadExponent(f64),
    #[error("huber width must be positive, got {0}")]
    BadHuberWidth(f64),
    #[error("unknown function spec '{0}'; expected pow:<k> or huber:<tau>")]
    UnknownSpec(String),
}

type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A nonnegative nondecreasing function with f(0) = 0, its inverse, and the
/// growth parameters the two-round protocol needs.
#[derive(Clone)]
pub struct FnSpec {
    name: String,
    f: RealFn,
    f_inv: RealFn,
    cf: RealFn,
    pub theta: f64,
    pub theta_prime: f64,
    pub theta_dblprime: f64,
}

impl fmt::Debug for FnSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnSpec")
            .field("name", &self.name)
            .field("theta", &self.theta)
            .field("theta_prime", &self.theta_prime)
            .field("theta_dblprime", &self.theta_dblprime)
            .finish()
    }
}

impl FnSpec {
    /// f(x) = x^k for k >= 1, with c_f[s] = s^max(k-1, 1): the exponent
    /// k - 1 governs k >= 2, while a point mass forces c_f[s] >= s for any
    /// nonzero function.
    pub fn power(k: f64) -> Result<Self, FnSpecError> {
        if !(k >= 1.0) || !k.is_finite() {
            return Err(FnSpecError::BadExponent(k));
        }
        Ok(Self {
            name: format!("pow:{k}"),
            f: Arc::new(move |x| x.powf(k)),
            f_inv: Arc::new(move |y| y.powf(1.0 / k)),
            cf: Arc::new(move |s| s.powf((k - 1.0).max(1.0))),
            theta: 2.0,
            theta_prime: 2f64.powf(1.0 / k),
            theta_dblprime: 2.0 * 8f64.powf(k / 2.0),
        })
    }

    /// Huber loss: x^2/(2 tau) below tau, x - tau/2 above, with c_f[s] = s.
    pub fn huber(tau: f64) -> Result<Self, FnSpecError> {
        if !(tau > 0.0) || !tau.is_finite() {
            return Err(FnSpecError::BadHuberWidth(tau));
        }
        Ok(Self {
            name: format!("huber:{tau}"),
            f: Arc::new(move |x| {
                if x <= tau {
                    x * x / (2.0 * tau)
                } else {
                    x - tau / 2.0
                }
            }),
            f_inv: Arc::new(move |y| {
                if y <= tau / 2.0 {
                    (2.0 * tau * y).sqrt()
                } else {
                    y + tau / 2.0
                }
            }),
            cf: Arc::new(|s| s),
            theta: 2.0,
            theta_prime: 2.0,
            theta_dblprime: 4.0,
        })
    }

    /// Parse `pow:<k>` or `huber:<tau>`.
    pub fn parse(spec: &str) -> Result<Self, FnSpecError> {
        if let Some(k) = spec.strip_prefix("pow:") {
            let k: f64 = k
                .parse()
                .map_err(|_| FnSpecError::UnknownSpec(spec.to_string()))?;
            Self::power(k)
        } else if let Some(tau) = spec.strip_prefix("huber:") {
            let tau: f64 = tau
                .parse()
                .map_err(|_| FnSpecError::UnknownSpec(spec.to_string()))?;
            Self::huber(tau)
        } else {
            Err(FnSpecError::UnknownSpec(spec.to_string()))
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn apply(&self, x: f64) -> f64 {
        (self.f)(x)
    }

    pub fn inverse(&self, y: f64) -> f64 {
        (self.f_inv)(y)
    }

    /// Analytic upper bound on c_f[s]; c_f[1] = 1 for every function.
    pub fn cf(&self, s: f64) -> f64 {
        (self.cf)(s)
    }

    /// eps_1 = 1/theta''.
    pub fn eps1(&self) -> f64 {
        1.0 / self.theta_dblprime
    }

    /// eps_2 = 1 - 1/theta''.
    pub fn eps2(&self) -> f64 {
        1.0 - 1.0 / self.theta_dblprime
    }
}

/// Registered analytic bound on the split constant for `s` servers.
pub fn cf_bound(fn_spec: &FnSpec, s: usize) -> f64 {
    fn_spec.cf(s as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_xoshiro::Xoshiro256PlusPlus;

    fn probe_grid(rng: &mut impl Rng, count: usize) -> Vec<f64> {
        (0..count)
            .map(|_| {
                // Spread probes over many magnitudes.
                let exp: f64 = rng.gen_range(-6.0..6.0);
                10f64.powf(exp) * rng.gen_range(0.1..10.0)
            })
            .collect()
    }

    fn check_fnspec_properties(spec: &FnSpec) {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(17);
        let xs = probe_grid(&mut rng, 10_000);
        let ys = probe_grid(&mut rng, 10_000);
        let shrink = spec.theta.sqrt() * spec.theta_prime / 4.0;
        for (&x, &y) in xs.iter().zip(&ys) {
            // Super-additivity.
            assert!(
                spec.apply(x + y) >= (spec.apply(x) + spec.apply(y)) * (1.0 - 1e-12),
                "{}: super-additivity failed at ({x}, {y})",
                spec.name()
            );
            // Growth: f(theta' y) >= theta f(y).
            assert!(
                spec.apply(spec.theta_prime * y) >= spec.theta * spec.apply(y) * (1.0 - 1e-12),
                "{}: growth failed at {y}",
                spec.name()
            );
            // Shrink: f(y * sqrt(theta) * theta' / 4) >= f(y)/theta''.
            assert!(
                spec.apply(y * shrink) >= spec.apply(y) / spec.theta_dblprime * (1.0 - 1e-12),
                "{}: shrink failed at {y}",
                spec.name()
            );
            // Inverse round trip.
            let back = spec.inverse(spec.apply(y));
            assert!(
                (back - y).abs() <= 1e-9 * y.abs(),
                "{}: inverse round trip {y} -> {back}",
                spec.name()
            );
        }
        // c_f growth laws on integer probes.
        for s in [1u32, 2, 3, 5, 8, 16] {
            for t in [1u32, 2, 4, 7] {
                let (sf, tf) = (s as f64, t as f64);
                assert!(
                    spec.cf(sf * tf) <= spec.cf(sf) * spec.cf(tf) * (1.0 + 1e-12),
                    "{}: submultiplicativity failed at ({s},{t})",
                    spec.name()
                );
                if s >= t {
                    assert!(
                        spec.cf(sf) >= spec.cf(tf) * sf / tf * (1.0 - 1e-12),
                        "{}: superlinearity failed at ({s},{t})",
                        spec.name()
                    );
                }
            }
        }
        assert!((spec.cf(1.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn power_spec_properties() {
        for k in [1.0, 2.0, 3.0, 4.0] {
            check_fnspec_properties(&FnSpec::power(k).unwrap());
        }
    }

    #[test]
    fn huber_spec_properties() {
        for tau in [0.5, 1.0, 3.0] {
            check_fnspec_properties(&FnSpec::huber(tau).unwrap());
        }
    }

    #[test]
    fn cf_bound_examples() {
        let cube = FnSpec::power(3.0).unwrap();
        assert_eq!(cf_bound(&cube, 4), 16.0);
        assert_eq!(cf_bound(&cube, 1), 1.0);
        let hub = FnSpec::huber(1.0).unwrap();
        assert_eq!(cf_bound(&hub, 8), 8.0);
        assert_eq!(cf_bound(&hub, 1), 1.0);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(FnSpec::power(0.5).is_err());
        assert!(FnSpec::power(f64::NAN).is_err());
        assert!(FnSpec::huber(0.0).is_err());
        assert!(FnSpec::parse("cosh:1").is_err());
        assert_eq!(FnSpec::parse("pow:3").unwrap().name(), "pow:3");
        assert_eq!(FnSpec::parse("huber:1").unwrap().name(), "huber:1");
    }

    #[test]
    fn huber_inverse_is_continuous_at_knee() {
        let hub = FnSpec::huber(2.0).unwrap();
        let knee = hub.apply(2.0); // = tau/2 * ... = 1.0
        assert!((hub.inverse(knee) - 2.0).abs() < 1e-12);
        assert!((hub.inverse(knee - 1e-9) - 2.0).abs() < 1e-4);
        assert!((hub.inverse(knee + 1e-9) - 2.0).abs() < 1e-4);
    }
}
