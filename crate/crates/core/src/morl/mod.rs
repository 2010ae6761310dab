//! Distributed multi-objective kernel R-learning.
//!
//! Agents share one [`QuantizedStateSet`]; each owns a visit table, two
//! ALD-grown kernel dictionaries (energy and backlog objectives) with their
//! weight vectors, an average-reward estimate and an n-step reward window.

pub mod agent;
pub mod kernel;
pub mod nstep;
pub mod quantize;
pub mod visit;

use serde::{Deserialize, Serialize};

use crate::env::{Direction, Offload, RewardVector};
use crate::Result;

pub use agent::{KernelAgent, KernelAgentParams, Objective};
pub use kernel::{kernel_eval, AldOutcome, Feature, KernelDictionary, KernelScales};
pub use nstep::{n_step_return, RewardBuffer, WindowOrder};
pub use quantize::{log_backlog, QState, QuantizedStateSet};
pub use visit::VisitTable;

/// What an agent decides: the UAV's heading (agent 0) or one UE's offloading.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Role {
    Uav,
    Ue(usize),
}

impl Role {
    pub fn for_agent(m: usize) -> Self {
        if m == 0 {
            Role::Uav
        } else {
            Role::Ue(m - 1)
        }
    }

    /// Action vectors used inside the kernel: unit headings for the UAV,
    /// one-hot `[UAV, BS, local]` for UEs.
    pub fn action_encodings(self) -> Vec<[f64; 3]> {
        match self {
            Role::Uav => Direction::ALL
                .iter()
                .map(|d| {
                    let (x, y) = d.heading();
                    [x, y, 0.0]
                })
                .collect(),
            Role::Ue(_) => Offload::ALL.iter().map(|o| o.one_hot()).collect(),
        }
    }

    pub fn n_actions(self) -> usize {
        match self {
            Role::Uav => Direction::ALL.len(),
            Role::Ue(_) => Offload::ALL.len(),
        }
    }
}

/// Linear decay from `start` to `end` over `decay_slots`, then flat.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsilonSchedule {
    pub start: f64,
    pub end: f64,
    pub decay_slots: u64,
}

impl EpsilonSchedule {
    pub fn constant(eps: f64) -> Self {
        Self {
            start: eps,
            end: eps,
            decay_slots: 0,
        }
    }

    pub fn at(&self, slot: u64) -> f64 {
        if self.decay_slots == 0 || slot >= self.decay_slots {
            return if self.decay_slots == 0 { self.start } else { self.end };
        }
        let frac = slot as f64 / self.decay_slots as f64;
        self.start + (self.end - self.start) * frac
    }
}

/// Visit-table epsilon-greedy shared by both engines.
///
/// Always consumes one uniform draw; with probability `eps` picks uniformly
/// among the never-tried actions of `row`, otherwise (or when there are
/// none left) takes `greedy()`. The chosen cell is marked visited.
pub fn visit_epsilon_greedy<R: rand::Rng + ?Sized>(
    visits: &mut VisitTable,
    row: usize,
    eps: f64,
    rng: &mut R,
    greedy: impl FnOnce() -> usize,
) -> Decision {
    visits.grow_to(row + 1);
    let draw: f64 = rng.random();
    let unvisited = visits.unvisited(row);
    let decision = if draw < eps && !unvisited.is_empty() {
        Decision {
            action: unvisited[rng.random_range(0..unvisited.len())],
            explored: true,
        }
    } else {
        Decision {
            action: greedy(),
            explored: false,
        }
    };
    visits.mark(row, decision.action);
    decision
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Decision {
    pub action: usize,
    pub explored: bool,
}

/// One agent's view of a slot: acted `action` in state `from`, received
/// `reward` (already scaled for learning) and landed in state `to`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub slot: u64,
    pub from: usize,
    pub action: usize,
    pub explored: bool,
    pub reward: RewardVector,
    pub to: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LearnReport {
    /// Whether a value update fired this slot.
    pub updated: bool,
    /// Energy and backlog TD errors (kernel) or losses (network).
    pub signal: Option<[f64; 2]>,
    /// Sizes of the energy and backlog approximators (dictionary entries or
    /// replay occupancy).
    pub sizes: [usize; 2],
}

/// Per-agent decision and learning interface shared by both engines.
pub trait Agent: Send {
    fn role(&self) -> Role;

    fn act(&mut self, states: &QuantizedStateSet, state: usize, slot: u64) -> Decision;

    fn learn(&mut self, states: &QuantizedStateSet, transition: &Transition) -> Result<LearnReport>;
}
