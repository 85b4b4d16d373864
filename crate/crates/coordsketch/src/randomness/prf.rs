//! Seeded counter-mode pseudorandom function.
//!
//! Every shared random object in this crate (exponential variates, key
//! hashes, derived sub-seeds) is a pure function of a 64-bit seed and a
//! position, so all parties reconstruct the same values from the seed alone
//! and no communication is ever charged for randomness.

/// One round of the splitmix64 finalizer.
#[inline]
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Deterministic 64-bit PRF of a (seed, stream, index) triple.
///
/// `stream` separates independent uses of the same master seed (different
/// protocol copies, hash indices, entities). Two finalizer rounds with
/// odd-constant tweaks give full avalanche across all three inputs.
#[inline]
pub fn prf64(seed: u64, stream: u64, index: u64) -> u64 {
    let a = mix(seed ^ 0x9e3779b97f4a7c15u64.wrapping_mul(stream.wrapping_add(1)));
    let b = mix(a ^ index.wrapping_mul(0xd1b54a32d192ed03));
    mix(b.wrapping_add(stream).rotate_left(23) ^ seed)
}

/// Derive an independent sub-seed, e.g. one per protocol copy or retry.
#[inline]
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    prf64(seed, 0x5eed, tag)
}

/// PRF over an arbitrary byte string, keyed by (salt, index).
///
/// Keys are folded 8 bytes at a time with a multiply-xor round; length is
/// absorbed up front so prefixes do not collide.
pub fn prf_bytes(key: &[u8], salt: u64, index: u64) -> u64 {
    let mut acc = mix(salt ^ index.wrapping_mul(0xa0761d6478bd642f) ^ (key.len() as u64));
    for chunk in key.chunks(8) {
        let mut word = [0u8; 8];
        word[..chunk.len()].copy_from_slice(chunk);
        acc = mix(acc ^ u64::from_le_bytes(word)).wrapping_mul(0xe7037ed1a0b428db);
    }
    mix(acc ^ salt.rotate_left(32))
}

/// Map a 64-bit word to a double in the open interval (0, 1).
///
/// 52 bits plus a half-step offset: the offset is exactly representable at
/// this width, so both endpoints stay strictly excluded and logs of `u` or
/// `1 - u` are always finite.
#[inline]
pub fn unit_open(word: u64) -> f64 {
    ((word >> 12) as f64 + 0.5) / (1u64 << 52) as f64
}

/// Map a 64-bit word to [0, 1) with the full 53 bits of resolution.
#[inline]
pub fn unit_half_open(word: u64) -> f64 {
    (word >> 11) as f64 / (1u64 << 53) as f64
}
