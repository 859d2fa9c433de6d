/// Derives an independent stream seed from `base` and a stream index.
///
/// Uses the SplitMix64 finalizer, so nearby `(base, stream)` pairs give
/// uncorrelated seeds. Replications and per-source streams both go through
/// here; results never depend on evaluation order.
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    let mut z = base.wrapping_add(stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for replication `r` of a run seeded with `base`.
pub fn replication_seed(base: u64, r: u64) -> u64 {
    derive_seed(base, r.wrapping_add(1 << 32))
}

/// Seed for the source at `index` (scenario declaration order) within one run.
pub fn source_seed(run_seed: u64, index: usize) -> u64 {
    derive_seed(run_seed, index as u64)
}
