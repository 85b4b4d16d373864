//! Seeded generation of the correlated random objects every protocol shares:
//! discretized exponential variates, uniform [0,1) key hashes, and a
//! small-seed PRG with random block access.
//!
//! Everything here is immutable after construction and lookups are pure
//! functions, so streams can be read concurrently and sent across threads.

mod exps;
mod hash;
mod nisan;
mod prf;

pub use exps::{gen_exponentials, ExpStream, ExpStreamError, DEFAULT_DISCRETIZATION_EPS};
pub use hash::{uniform_hash, KeyHash};
pub use nisan::{NisanPrg, PrgError};
pub use prf::{derive_seed, prf64, prf_bytes, unit_half_open, unit_open};
