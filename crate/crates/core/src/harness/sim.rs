use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::agents::AnyAgent;
use super::config::{AgentKind, SimConfig};
use crate::env::{self, BitLedger, EnvRng, EnvState, JointAction, NetworkConfig, RewardVector, StepOutcome};
use crate::morl::{Agent, Decision, LearnReport, QState, QuantizedStateSet, Transition};
use crate::par::{self, ExecMode};
use crate::{Error, Result};

const CHECKPOINT_VERSION: u32 = 1;

/// Everything observed in one slot.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotRecord {
    /// 1-based slot number.
    pub t: u64,
    pub energy_j: f64,
    pub backlog_bits: u64,
    pub avg_energy_j: f64,
    pub avg_backlog_bits: f64,
    /// UAV position the slot was served from.
    pub uav: [f64; 3],
    pub actions: Vec<usize>,
    pub explored: Vec<bool>,
    pub t_decide_s: f64,
    pub t_learn_s: f64,
    pub reports: Vec<LearnReport>,
    pub outcome: StepOutcome,
}

/// A run in progress: environment, learners and running statistics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Simulation {
    config: SimConfig,
    seed: u64,
    network: NetworkConfig,
    env: EnvState,
    env_rng: EnvRng,
    states: QuantizedStateSet,
    current: usize,
    agents: Vec<AnyAgent>,
    ledger: BitLedger,
    sum_energy_j: f64,
    sum_backlog_bits: u128,
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    version: u32,
    sim: Simulation,
}

impl Simulation {
    pub fn new(config: &SimConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let network = config.network()?;
        let env = EnvState::initial(&network);
        let mut states = QuantizedStateSet::new(config.mu_q, config.mu_d);
        let (current, _) = states.quantize(QState::observe(env.uav_pos, env.total_backlog()));
        Ok(Self {
            agents: AnyAgent::population(config, seed),
            config: config.clone(),
            seed,
            network,
            env,
            env_rng: EnvRng::from_seed(seed),
            states,
            current,
            ledger: BitLedger::default(),
            sum_energy_j: 0.0,
            sum_backlog_bits: 0,
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn kind(&self) -> AgentKind {
        self.config.agent
    }

    /// Slots executed so far.
    pub fn slot(&self) -> u64 {
        self.env.t
    }

    pub fn is_done(&self) -> bool {
        self.env.t >= self.config.timeslots
    }

    pub fn env(&self) -> &EnvState {
        &self.env
    }

    pub fn network(&self) -> &NetworkConfig {
        &self.network
    }

    pub fn agents(&self) -> &[AnyAgent] {
        &self.agents
    }

    /// Index of the current quantized state in [`Self::states`].
    pub fn current_state(&self) -> usize {
        self.current
    }

    pub fn states(&self) -> &QuantizedStateSet {
        &self.states
    }

    pub fn ledger(&self) -> BitLedger {
        self.ledger
    }

    fn exec_mode(&self) -> ExecMode {
        if self.config.parallel_agents {
            ExecMode::Parallel
        } else {
            ExecMode::Sequential
        }
    }

    /// Per-agent decisions for the current state, without stepping the world.
    pub fn decide(&mut self) -> Vec<Decision> {
        let (states, current, slot) = (&self.states, self.current, self.env.t);
        par::map_mut(self.exec_mode(), &mut self.agents, |_, a| a.act(states, current, slot))
    }

    /// Per-objective reward handed to the learners.
    pub fn learning_reward(&self, outcome: &StepOutcome) -> RewardVector {
        RewardVector::new(
            -outcome.energy_total / self.config.reward_scale_energy_j,
            -(outcome.backlog_total as f64) / self.config.reward_scale_backlog_bits,
        )
    }

    /// Runs one slot: decide, step the environment, learn.
    pub fn step(&mut self) -> Result<SlotRecord> {
        let slot = self.env.t;
        self.step_inner().map_err(|e| e.at_slot(slot))
    }

    fn step_inner(&mut self) -> Result<SlotRecord> {
        let slot = self.env.t;
        let from = self.current;

        let clock = Instant::now();
        let decisions = self.decide();
        let t_decide_s = clock.elapsed().as_secs_f64();

        let actions: Vec<usize> = decisions.iter().map(|d| d.action).collect();
        let joint = JointAction::from_codes(&actions)?;
        let (next, outcome) = env::step(&self.env, &joint, &self.network, &mut self.env_rng)?;
        self.ledger.record(&outcome);
        if !self.ledger.balances(&next) {
            return Err(Error::InternalState(format!(
                "bit audit failed: ledger says {} outstanding, queues hold {}",
                self.ledger.outstanding(),
                next.bits_in_system()
            )));
        }
        let (to, _) = self.states.quantize(QState::observe(next.uav_pos, next.total_backlog()));
        let reward = self.learning_reward(&outcome);

        let clock = Instant::now();
        let states = &self.states;
        let reports = par::map_mut(self.exec_mode(), &mut self.agents, |m, a| {
            a.learn(
                states,
                &Transition {
                    slot,
                    from,
                    action: decisions[m].action,
                    explored: decisions[m].explored,
                    reward,
                    to,
                },
            )
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
        let t_learn_s = clock.elapsed().as_secs_f64();

        self.env = next;
        self.current = to;
        self.sum_energy_j += outcome.energy_total;
        self.sum_backlog_bits += outcome.backlog_total as u128;
        let t = self.env.t;
        Ok(SlotRecord {
            t,
            energy_j: outcome.energy_total,
            backlog_bits: outcome.backlog_total,
            avg_energy_j: self.sum_energy_j / t as f64,
            avg_backlog_bits: self.sum_backlog_bits as f64 / t as f64,
            uav: self.env.uav_pos,
            actions,
            explored: decisions.iter().map(|d| d.explored).collect(),
            t_decide_s,
            t_learn_s,
            reports,
            outcome,
        })
    }

    pub fn save_checkpoint(&self, path: &Path) -> Result<()> {
        let ck = CheckpointRef {
            version: CHECKPOINT_VERSION,
            sim: self,
        };
        let tmp = path.with_extension("json.tmp");
        std::fs::write(&tmp, serde_json::to_vec(&ck)?)?;
        std::fs::rename(tmp, path)?;
        Ok(())
    }

    pub fn load_checkpoint(path: &Path) -> Result<Self> {
        let ck: Checkpoint = serde_json::from_slice(&std::fs::read(path)?)?;
        if ck.version != CHECKPOINT_VERSION {
            return Err(Error::Contract(format!(
                "checkpoint version {} is not supported (expected {CHECKPOINT_VERSION})",
                ck.version
            )));
        }
        Ok(ck.sim)
    }
}

#[derive(Serialize)]
struct CheckpointRef<'a> {
    version: u32,
    sim: &'a Simulation,
}
