//! Shared helpers for integration tests: a self-contained deterministic
//! RNG (SplitMix64) and grid builders, independent of the crate internals.

#![allow(dead_code)]

pub fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn unit(state: &mut u64) -> f64 {
    (splitmix64(state) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

pub fn uniform(state: &mut u64, lo: f64, hi: f64) -> f64 {
    lo + unit(state) * (hi - lo)
}

pub fn log_uniform(state: &mut u64, lo: f64, hi: f64) -> f64 {
    (lo.ln() + unit(state) * (hi.ln() - lo.ln())).exp()
}

/// `count` log-spaced values from `lo` to `hi` inclusive.
pub fn geomspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    (0..count)
        .map(|i| (lo.ln() + (hi / lo).ln() * i as f64 / (count - 1) as f64).exp())
        .collect()
}

pub fn fixture(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

pub fn median(mut values: Vec<f64>) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}
