//! Seed derivation.
//!
//! Every stochastic stage draws from a ChaCha8 stream seeded by
//! `child(root, label)`, where `label` names the stage (for example
//! `"noise/modality2"` or `"knn-split"`). Child seeds are SplitMix64 mixes of
//! the root seed with an FNV-1a hash of the label, so adding a stage never
//! shifts the streams of existing ones.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn fnv1a(bytes: &[u8]) -> u64 {
    bytes
        .iter()
        .fold(FNV_OFFSET, |h, b| (h ^ u64::from(*b)).wrapping_mul(FNV_PRIME))
}

pub fn child(root: u64, label: &str) -> u64 {
    splitmix64(root ^ splitmix64(fnv1a(label.as_bytes())))
}

pub fn child_indexed(root: u64, label: &str, index: u64) -> u64 {
    splitmix64(child(root, label) ^ splitmix64(index.wrapping_add(1)))
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Order-independent hash of a set of rows: per-row FNV hashes of the value
/// bit patterns, mixed and summed.
pub fn row_set_hash<'a, I>(rows: I) -> u64
where
    I: IntoIterator<Item = &'a [f64]>,
{
    rows.into_iter().fold(0u64, |acc, row| {
        let h = row
            .iter()
            .fold(FNV_OFFSET, |h, v| {
                v.to_bits()
                    .to_le_bytes()
                    .iter()
                    .fold(h, |h, b| (h ^ u64::from(*b)).wrapping_mul(FNV_PRIME))
            });
        acc.wrapping_add(splitmix64(h))
    })
}
