use serde::{Deserialize, Serialize};

use super::config::{AgentKind, SimConfig};
use crate::dnn::DnnAgent;
use crate::morl::{Agent, Decision, KernelAgent, LearnReport, QuantizedStateSet, Role, Transition};
use crate::Result;

/// Either engine behind one concrete type, so a run's agents can live in a
/// plain `Vec` and be serialized into checkpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum AnyAgent {
    Kernel(KernelAgent),
    Dnn(DnnAgent),
}

impl AnyAgent {
    /// Agents `0..=M` for `config`, seeded from `seed`.
    pub fn population(config: &SimConfig, seed: u64) -> Vec<AnyAgent> {
        (0..=config.num_ues())
            .map(|m| match config.agent {
                AgentKind::Kernel => AnyAgent::Kernel(KernelAgent::new(m, config.kernel_params(), seed)),
                AgentKind::Dnn => AnyAgent::Dnn(DnnAgent::new(m, config.dnn_params(), seed)),
            })
            .collect()
    }

    pub fn kind(&self) -> AgentKind {
        match self {
            AnyAgent::Kernel(_) => AgentKind::Kernel,
            AnyAgent::Dnn(_) => AgentKind::Dnn,
        }
    }
}

impl Agent for AnyAgent {
    fn role(&self) -> Role {
        match self {
            AnyAgent::Kernel(a) => a.role(),
            AnyAgent::Dnn(a) => a.role(),
        }
    }

    fn act(&mut self, states: &QuantizedStateSet, state: usize, slot: u64) -> Decision {
        match self {
            AnyAgent::Kernel(a) => a.act(states, state, slot),
            AnyAgent::Dnn(a) => a.act(states, state, slot),
        }
    }

    fn learn(&mut self, states: &QuantizedStateSet, transition: &Transition) -> Result<LearnReport> {
        match self {
            AnyAgent::Kernel(a) => a.learn(states, transition),
            AnyAgent::Dnn(a) => a.learn(states, transition),
        }
    }
}
