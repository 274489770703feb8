use crate::au::AuId;

/// SplitMix64 finalizer.
pub fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent stream seed for one AU.
pub fn au_seed(base: u64, au: AuId) -> u64 {
    mix(base ^ (u64::from(au.code()) << 32))
}

/// Independent stream seed for a named purpose.
pub fn named_seed(base: u64, name: &str) -> u64 {
    name.bytes().fold(mix(base), |acc, b| mix(acc ^ u64::from(b)))
}
