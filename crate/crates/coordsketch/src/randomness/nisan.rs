//! Small-seed pseudorandom generator with random block access.
//!
//! The generator is the classic recursive construction: a seed block `x` and
//! one pairwise-independent hash `h_l` per level expand into `2^L` blocks,
//! where block `i` of level `l` is block `i` of level `l-1` when the top bit
//! of `i` is clear and comes from the branch re-keyed by `h_l` otherwise.
//! A block is reached by walking the index bits from the top level down, so
//! random access costs one hash application per set level. The seed holds
//! `2L + 1` words for `L` levels, quadratic in the block width rather than
//! linear in the stream length.
//!
//! Hashes are `h(x) = a*x + c` over GF(2^64); blocks narrower than 64 bits
//! are the low bits of the walked state.

use super::prf::prf64;
use thiserror::Error;

/// Reduction polynomial for GF(2^64): x^64 + x^4 + x^3 + x + 1.
const GF64_POLY: u64 = 0x1b;

/// Carry-less multiplication in GF(2^64).
fn gf64_mul(a: u64, b: u64) -> u64 {
    let mut hi = 0u64;
    let mut lo = 0u64;
    for i in 0..64 {
        if (b >> i) & 1 == 1 {
            lo ^= a << i;
            if i > 0 {
                hi ^= a >> (64 - i);
            }
        }
    }
    // Reduce the 128-bit product; the reduction polynomial has degree <= 4,
    // so two folding passes suffice.
    let mut acc = lo;
    let mut carry = hi;
    for _ in 0..2 {
        if carry == 0 {
            break;
        }
        let folded = gf64_shift_reduce(carry);
        acc ^= folded.0;
        carry = folded.1;
    }
    acc
}

/// Multiply a 64-bit value by the reduction polynomial image of x^64.
fn gf64_shift_reduce(v: u64) -> (u64, u64) {
    // x^64 == x^4 + x^3 + x + 1, so v * x^64 == v*(x^4 + x^3 + x + 1).
    let mut lo = 0u64;
    let mut hi = 0u64;
    for sh in [4u32, 3, 1, 0] {
        lo ^= v << sh;
        if sh > 0 {
            hi ^= v >> (64 - sh);
        }
    }
    let _ = GF64_POLY;
    (lo, hi)
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PrgError {
    #[error("block width must be in 1..=64 bits, got {0}")]
    BadBlockBits(u32),
    #[error("stream must declare at least one block")]
    EmptyStream,
    #[error("seed material too short: need {need} bytes for {blocks} blocks, got {got}")]
    SeedTooShort { need: usize, blocks: u64, got: usize },
    #[error("block index {index} beyond declared stream length {len}")]
    IndexOutOfRange { index: u64, len: u64 },
}

/// Random-access PRG stream of fixed-width blocks.
#[derive(Debug, Clone)]
pub struct NisanPrg {
    x0: u64,
    /// (multiplier, offset) per level; level 0 is the lowest index bit.
    levels: Vec<(u64, u64)>,
    block_bits: u32,
    num_blocks: u64,
}

impl NisanPrg {
    /// Number of levels needed to address `num_blocks` blocks.
    fn level_count(num_blocks: u64) -> usize {
        if num_blocks <= 1 {
            0
        } else {
            (64 - (num_blocks - 1).leading_zeros()) as usize
        }
    }

    /// Seed bytes required for a stream of `num_blocks` blocks.
    pub fn required_seed_bytes(num_blocks: u64) -> usize {
        (2 * Self::level_count(num_blocks) + 1) * 8
    }

    /// Build from raw little-endian seed material, as read from a seed file.
    pub fn from_seed_material(
        material: &[u8],
        block_bits: u32,
        num_blocks: u64,
    ) -> Result<Self, PrgError> {
        if block_bits == 0 || block_bits > 64 {
            return Err(PrgError::BadBlockBits(block_bits));
        }
        if num_blocks == 0 {
            return Err(PrgError::EmptyStream);
        }
        let need = Self::required_seed_bytes(num_blocks);
        if material.len() < need {
            return Err(PrgError::SeedTooShort {
                need,
                blocks: num_blocks,
                got: material.len(),
            });
        }
        let word = |i: usize| {
            let mut w = [0u8; 8];
            w.copy_from_slice(&material[i * 8..i * 8 + 8]);
            u64::from_le_bytes(w)
        };
        let x0 = word(0);
        let levels = (0..Self::level_count(num_blocks))
            .map(|l| {
                // A zero multiplier would collapse the branch to a constant.
                let a = word(1 + 2 * l).max(1);
                let c = word(2 + 2 * l);
                (a, c)
            })
            .collect();
        Ok(Self {
            x0,
            levels,
            block_bits,
            num_blocks,
        })
    }

    /// Expand a 64-bit master seed into seed material and build the stream.
    pub fn from_master_seed(seed: u64, block_bits: u32, num_blocks: u64) -> Result<Self, PrgError> {
        let words = 2 * Self::level_count(num_blocks) + 1;
        let mut material = Vec::with_capacity(words * 8);
        for i in 0..words {
            material.extend_from_slice(&prf64(seed, 0x6e15a9, i as u64).to_le_bytes());
        }
        Self::from_seed_material(&material, block_bits, num_blocks)
    }

    pub fn num_blocks(&self) -> u64 {
        self.num_blocks
    }

    pub fn block_bits(&self) -> u32 {
        self.block_bits
    }

    /// The `index`-th block, masked to the declared width.
    pub fn block(&self, index: u64) -> Result<u64, PrgError> {
        if index >= self.num_blocks {
            return Err(PrgError::IndexOutOfRange {
                index,
                len: self.num_blocks,
            });
        }
        let mut state = self.x0;
        for l in (0..self.levels.len()).rev() {
            if (index >> l) & 1 == 1 {
                let (a, c) = self.levels[l];
                state = gf64_mul(a, state) ^ c;
            }
        }
        if self.block_bits == 64 {
            Ok(state)
        } else {
            Ok(state & ((1u64 << self.block_bits) - 1))
        }
    }
}
