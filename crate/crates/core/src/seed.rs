//! Deterministic seed derivation, so that one top-level seed fans out into
//! independent streams per phase, hypothesis and rollout.

/// SplitMix64 finalizer.
pub fn mix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Seed for a named phase (`"cluster"`, `"train"`, …).
pub fn derive(seed: u64, tag: &str) -> u64 {
    tag.bytes()
        .fold(mix(seed), |acc, b| mix(acc ^ u64::from(b)))
}

/// Seed for an indexed sub-stream.
pub fn derive_indexed(seed: u64, parts: &[u64]) -> u64 {
    parts.iter().fold(mix(seed), |acc, &p| mix(acc ^ mix(p)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_differ() {
        assert_ne!(derive(1, "train"), derive(1, "cluster"));
        assert_ne!(derive(1, "train"), derive(2, "train"));
        assert_eq!(derive(1, "train"), derive(1, "train"));
        assert_ne!(derive_indexed(5, &[0, 1]), derive_indexed(5, &[1, 0]));
    }
}
