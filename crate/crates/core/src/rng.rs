//! Counter-based random streams.
//!
//! Every random draw in the crate comes from a stream identified by
//! `(seed, path index, role)`. ChaCha is a counter-mode generator, so selecting a
//! stream is O(1) and the draws a path sees never depend on which thread ran it or
//! in which order paths were scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type PathRng = ChaCha8Rng;

/// What a stream is used for. Distinct roles of the same path never overlap.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum StreamRole {
    Brownian = 0,
    Jumps = 1,
    Initial = 2,
    Aux = 3,
}

const ROLE_BITS: u32 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamKey {
    pub seed: u64,
    pub path: u64,
    pub role: StreamRole,
}

impl StreamKey {
    pub fn new(seed: u64, path: u64, role: StreamRole) -> Self {
        Self { seed, path, role }
    }

    pub fn with_role(self, role: StreamRole) -> Self {
        Self { role, ..self }
    }

    pub fn stream_id(&self) -> u64 {
        debug_assert!(self.path < (1u64 << (64 - ROLE_BITS)));
        (self.path << ROLE_BITS) | self.role as u64
    }

    pub fn rng(&self) -> PathRng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id());
        rng
    }
}
