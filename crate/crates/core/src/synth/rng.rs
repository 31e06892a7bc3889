//! Deterministic per-frame random substreams.
//!
//! A substream is a `Pcg64Mcg` whose 128-bit state is built from three
//! chained splitmix64 steps over `(seed, index, domain)`:
//!
//! ```text
//! a = splitmix64(seed)
//! b = splitmix64(a ^ index)
//! c = splitmix64(b ^ domain)
//! state = (splitmix64(c) << 64) | splitmix64(c ^ 0x9E3779B97F4A7C15)
//! ```
//!
//! `index` is the global frame index (or a day number, for per-day draws) and
//! `domain` separates independent consumers of the same index, so adding a
//! transmitter never perturbs the background stream of any frame.

use rand_pcg::Pcg64Mcg;

pub mod domain {
    pub const BACKGROUND: u64 = 0x01;
    /// Plus the transmitter index.
    pub const TRANSMITTER: u64 = 0x100;
    /// Plus the RFI source index.
    pub const RFI: u64 = 0x200;
    /// Plus the transmitter index; indexed by MJD day.
    pub const DUTY: u64 = 0x300;
    pub const CORRELATOR: u64 = 0x400;
    pub const DENSE: u64 = 0x500;
}

#[inline]
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn substream(seed: u64, index: u64, domain: u64) -> Pcg64Mcg {
    let a = splitmix64(seed);
    let b = splitmix64(a ^ index);
    let c = splitmix64(b ^ domain);
    let hi = splitmix64(c) as u128;
    let lo = splitmix64(c ^ 0x9E37_79B9_7F4A_7C15) as u128;
    Pcg64Mcg::new((hi << 64) | lo)
}
