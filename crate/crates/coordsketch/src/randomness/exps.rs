//! Discretized standard-exponential variates with random access.
//!
//! All parties holding the same seed see the same variates, which is what
//! lets the protocols correlate randomness across servers at zero
//! communication cost. Variates are drawn by inverse CDF from a PRF word and
//! rounded down to the nearest power of `1 + eps/4`, so each one is a pure
//! function of `(seed, index)` and is representable by a small signed grid
//! exponent.

use super::nisan::{NisanPrg, PrgError};
use super::prf::{prf64, unit_open};
use thiserror::Error;

/// Grid ratio used when the caller does not tie the stream to a protocol
/// accuracy; small enough that distributional tests see < 1% distortion.
pub const DEFAULT_DISCRETIZATION_EPS: f64 = 0.05;

/// Stream tag separating exponential draws from other PRF uses.
const EXP_STREAM: u64 = 0xe4b;

#[derive(Debug, Error, PartialEq)]
pub enum ExpStreamError {
    #[error("precision_bits must be at least 32, got {0}")]
    PrecisionTooSmall(u32),
    #[error("count must be at least 1")]
    EmptyStream,
    #[error("variate index {index} beyond stream length {len}")]
    IndexOutOfRange { index: u64, len: u64 },
    #[error("invalid discretization eps {0}; must be in (0, 1)")]
    BadDiscretization(f64),
    #[error(transparent)]
    Prg(#[from] PrgError),
}

#[derive(Debug, Clone)]
enum Backend {
    /// Counter-mode PRF of (seed, index): effectively fully random.
    FullRandom { seed: u64 },
    /// Blocks drawn from the small-seed PRG.
    NisanPrg(Box<NisanPrg>),
}

/// Seeded stream of i.i.d. discretized standard exponentials.
#[derive(Debug, Clone)]
pub struct ExpStream {
    backend: Backend,
    count: u64,
    precision_bits: u32,
    discretization_eps: f64,
    /// ln(1 + eps/4), cached.
    log_ratio: f64,
    /// Grid exponents are clamped to +/- this bound so every variate is
    /// representable in `precision_bits` bits.
    max_grid_exp: i64,
}

impl ExpStream {
    fn build(
        backend: Backend,
        count: u64,
        precision_bits: u32,
        discretization_eps: f64,
    ) -> Result<Self, ExpStreamError> {
        if precision_bits < 32 {
            return Err(ExpStreamError::PrecisionTooSmall(precision_bits));
        }
        if count == 0 {
            return Err(ExpStreamError::EmptyStream);
        }
        if !(discretization_eps > 0.0 && discretization_eps < 1.0) {
            return Err(ExpStreamError::BadDiscretization(discretization_eps));
        }
        let ratio = 1.0 + discretization_eps / 4.0;
        let max_grid_exp = 1i64 << (precision_bits.min(62) - 1);
        Ok(Self {
            backend,
            count,
            precision_bits,
            discretization_eps,
            log_ratio: ratio.ln(),
            max_grid_exp,
        })
    }

    /// Fully random backend with the default discretization.
    pub fn full_random(seed: u64, count: u64, precision_bits: u32) -> Result<Self, ExpStreamError> {
        Self::build(
            Backend::FullRandom { seed },
            count,
            precision_bits,
            DEFAULT_DISCRETIZATION_EPS,
        )
    }

    /// Fully random backend with an explicit grid ratio `1 + eps/4`.
    pub fn full_random_with_eps(
        seed: u64,
        count: u64,
        precision_bits: u32,
        discretization_eps: f64,
    ) -> Result<Self, ExpStreamError> {
        Self::build(
            Backend::FullRandom { seed },
            count,
            precision_bits,
            discretization_eps,
        )
    }

    /// PRG backend: variate `i` is discretized from PRG block `i`.
    pub fn nisan(seed: u64, count: u64, precision_bits: u32) -> Result<Self, ExpStreamError> {
        Self::nisan_with_eps(seed, count, precision_bits, DEFAULT_DISCRETIZATION_EPS)
    }

    pub fn nisan_with_eps(
        seed: u64,
        count: u64,
        precision_bits: u32,
        discretization_eps: f64,
    ) -> Result<Self, ExpStreamError> {
        if precision_bits < 32 {
            return Err(ExpStreamError::PrecisionTooSmall(precision_bits));
        }
        let prg = NisanPrg::from_master_seed(seed, precision_bits.min(64), count)?;
        Self::build(
            Backend::NisanPrg(Box::new(prg)),
            count,
            precision_bits,
            discretization_eps,
        )
    }

    /// PRG backend from externally supplied seed material (raw LE bytes).
    pub fn nisan_from_material(
        material: &[u8],
        count: u64,
        precision_bits: u32,
        discretization_eps: f64,
    ) -> Result<Self, ExpStreamError> {
        if precision_bits < 32 {
            return Err(ExpStreamError::PrecisionTooSmall(precision_bits));
        }
        let prg = NisanPrg::from_seed_material(material, precision_bits.min(64), count)?;
        Self::build(
            Backend::NisanPrg(Box::new(prg)),
            count,
            precision_bits,
            discretization_eps,
        )
    }

    pub fn len(&self) -> u64 {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn precision_bits(&self) -> u32 {
        self.precision_bits
    }

    pub fn discretization_eps(&self) -> f64 {
        self.discretization_eps
    }

    pub fn is_prg_backed(&self) -> bool {
        matches!(self.backend, Backend::NisanPrg(_))
    }

    fn raw_word(&self, index: u64) -> u64 {
        match &self.backend {
            Backend::FullRandom { seed } => prf64(*seed, EXP_STREAM, index),
            // Index validity was checked by the caller. The PRG emits its
            // b random bits in the low positions; align them to the top
            // where the uniform draw reads.
            Backend::NisanPrg(prg) => {
                let block = prg.block(index).expect("index checked");
                block << (64 - prg.block_bits())
            }
        }
    }

    /// The `index`-th variate. Errors past the declared stream length.
    pub fn try_variate(&self, index: u64) -> Result<f64, ExpStreamError> {
        if index >= self.count {
            return Err(ExpStreamError::IndexOutOfRange {
                index,
                len: self.count,
            });
        }
        let word = self.raw_word(index);
        // Use at most the declared precision for the uniform draw.
        let bits = self.precision_bits.min(52);
        let u = if bits == 52 {
            unit_open(word)
        } else {
            ((word >> (64 - bits)) as f64 + 0.5) / (1u64 << bits) as f64
        };
        let e = -u.ln(); // u in (0,1) => e in (0, inf)
        let grid = (e.ln() / self.log_ratio).floor() as i64;
        let grid = grid.clamp(-self.max_grid_exp, self.max_grid_exp);
        let v = (self.log_ratio * grid as f64).exp();
        debug_assert!(v > 0.0);
        Ok(v)
    }

    /// Convenience accessor; panics past the stream length.
    pub fn variate(&self, index: u64) -> f64 {
        self.try_variate(index).expect("variate index in range")
    }
}

/// Seeded stream of discretized standard exponentials (fully random backend).
pub fn gen_exponentials(
    seed: u64,
    count: u64,
    precision_bits: u32,
) -> Result<ExpStream, ExpStreamError> {
    ExpStream::full_random(seed, count, precision_bits)
}
