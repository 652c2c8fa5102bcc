//! Deterministic seed derivation. Every parallel unit of work (a restart, a
//! device, a day) draws from its own generator seeded by mixing the master
//! seed with the unit's coordinates, so scheduling order can never change
//! results.

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Fold a list of words into one well-mixed seed.
pub fn mix(parts: &[u64]) -> u64 {
    let mut acc = 0x51_7C_C1B7_2722_0A95u64;
    for &p in parts {
        acc = splitmix64(acc ^ p);
    }
    acc
}
