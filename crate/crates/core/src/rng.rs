//! Named random streams derived from one master seed.
//!
//! Every consumer of randomness owns its own ChaCha stream so that, for a
//! fixed seed, swapping the agent kind never shifts the environment's draws.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    EnvFading,
    EnvLos,
    EnvTasks,
    /// Exploration draws of agent `m`.
    Explore(u32),
    DnnInit(u32),
    Replay(u32),
}

impl Stream {
    fn id(self) -> u64 {
        // Agent streams are spread out so that up to 2^20 agents never collide
        // with the fixed environment ids.
        match self {
            Stream::EnvFading => 1,
            Stream::EnvLos => 2,
            Stream::EnvTasks => 3,
            Stream::Explore(m) => (1 << 20) + m as u64,
            Stream::DnnInit(m) => (2 << 20) + m as u64,
            Stream::Replay(m) => (3 << 20) + m as u64,
        }
    }
}

pub fn stream(master_seed: u64, which: Stream) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(which.id());
    rng
}
