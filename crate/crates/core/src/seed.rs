//! Seed derivation. Every random choice in a run is drawn from a ChaCha8
//! stream whose seed is mixed from the run seed and the structural position
//! of the draw (round, stage, group), so a whole run replays from one integer.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator name recorded in run metadata.
pub const RNG_NAME: &str = "ChaCha8Rng (rand_chacha 0.3, seed_from_u64)";

/// The generator used for every seeded draw.
pub type Rng = ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds `parts` into `seed`: `h = splitmix64(h ^ splitmix64(part))` per part.
pub fn mix(seed: u64, parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(splitmix64(seed), |h, &p| splitmix64(h ^ splitmix64(p)))
}

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// FNV-1a over bytes; stable across platforms and releases.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Seed for round `r`.
pub fn round_seed(run_seed: u64, round: usize) -> u64 {
    mix(run_seed, &[0x0052_4f55_4e44, round as u64])
}

/// Seed for stage `k` of a round.
pub fn stage_seed(round_seed: u64, stage: usize) -> u64 {
    mix(round_seed, &[0x0053_5441_4745, stage as u64])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mixing_separates_positions() {
        let a = mix(7, &[0, 1]);
        let b = mix(7, &[1, 0]);
        let c = mix(8, &[0, 1]);
        assert_ne!(a, b);
        assert_ne!(a, c);
        assert_eq!(a, mix(7, &[0, 1]));
        assert_ne!(round_seed(1, 0), round_seed(1, 1));
    }

    #[test]
    fn fnv_reference_values() {
        assert_eq!(fnv1a(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a(b"a"), 0xaf63dc4c8601ec8c);
    }
}
