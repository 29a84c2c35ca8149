//! Deterministic seed derivation.
//!
//! Every source of randomness in the pipeline flows from one master seed.
//! Sub-seeds are derived from `(master, label)` pairs so that independent
//! stages (corpus, split, noise, per-sentence draws) never share a stream
//! and reorderings of work items cannot change what each item sees.

/// splitmix64 step; the standard finalizer used to decorrelate seed material.
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a sub-seed from a master seed and a textual label.
pub fn derive(master: u64, label: &str) -> u64 {
    // FNV-1a over the label, then mix with the master through splitmix64.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    let mut state = master ^ h;
    splitmix64(&mut state)
}

/// Derives a sub-seed from a master seed, a label, and an index.
pub fn derive_indexed(master: u64, label: &str, index: u64) -> u64 {
    let mut state = derive(master, label) ^ index.wrapping_mul(0xa076_1d64_78bd_642f);
    splitmix64(&mut state)
}

/// Standard normal draw via Box-Muller; two uniform draws per sample.
pub fn gaussian(rng: &mut impl rand::Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}
