//! Reproducible random sub-streams.
//!
//! Every study gets its own seed mixed from `(global seed, study id)`, and each
//! arm of a study reads from a separate ChaCha stream of that seed. The draws
//! for one study therefore never depend on how many other studies exist or on
//! the order in which worker threads pick them up.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Study arm, used as the ChaCha stream selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Arm {
    Control,
    Experiment,
}

impl Arm {
    pub fn tag(self) -> u64 {
        match self {
            Arm::Control => 0,
            Arm::Experiment => 1,
        }
    }
}

/// SplitMix64 finalizer.
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for one study, derived from the run's global seed.
pub fn study_seed(global_seed: u64, study_id: u32) -> u64 {
    mix64(global_seed ^ mix64(u64::from(study_id).wrapping_add(0xC0_47_A0)))
}

/// Independent generator for one arm of a study.
pub fn arm_stream(seed: u64, arm: Arm) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(arm.tag());
    rng
}
