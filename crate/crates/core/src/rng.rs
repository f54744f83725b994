//! Keyed random substreams.
//!
//! Every stream is addressed by `(seed, tag, index)`. Streams with different
//! keys are statistically independent, and drawing more values from one
//! stream never shifts another, so adding points to a realization leaves the
//! marks of earlier points untouched.

use rand::{RngCore, SeedableRng};
use rand_xoshiro::{SplitMix64, Xoshiro256PlusPlus};

pub type StreamRng = Xoshiro256PlusPlus;

pub const TAG_COUNT: u64 = 0x636f_756e_74;
pub const TAG_POSITIONS: u64 = 0x706f_7369_7469;
pub const TAG_MARK: u64 = 0x6d61_726b;
pub const TAG_AUX: u64 = 0x6175_78;

#[inline]
fn mix(x: u64) -> u64 {
    SplitMix64::seed_from_u64(x).next_u64()
}

/// Generator for stream `index` of purpose `tag` under `seed`.
pub fn substream(seed: u64, tag: u64, index: u64) -> StreamRng {
    let key = mix(mix(seed ^ mix(tag)) ^ index);
    Xoshiro256PlusPlus::seed_from_u64(key)
}

/// Derived seed for the `i`-th trial of an experiment.
pub fn trial_seed(seed: u64, i: u64) -> u64 {
    mix(mix(seed) ^ mix(i.wrapping_add(0x7472_6961_6c)))
}
