use serde::{Deserialize, Serialize};

use super::adam::{AdamConfig, AdamState};
use super::mlp::{td_loss_and_grad, Mlp};
use super::replay::{ReplayBuffer, StoredTransition};
use crate::env::Arena;
use crate::morl::agent::argmax;
use crate::morl::{visit_epsilon_greedy, Agent, Decision, EpsilonSchedule, LearnReport, QState, QuantizedStateSet, Role, Transition, VisitTable};
use crate::rng::{stream, Stream, StreamRng};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DnnAgentParams {
    pub hidden: Vec<usize>,
    pub batch: usize,
    pub replay_capacity: usize,
    /// Train steps between hard copies into the target network.
    pub target_period: u64,
    pub adam: AdamConfig,
    pub gamma: f64,
    pub weights: [f64; 2],
    pub epsilon: EpsilonSchedule,
    /// Used to scale positions into `[0, 1]`.
    pub arena: Arena,
}

impl Default for DnnAgentParams {
    fn default() -> Self {
        Self {
            hidden: vec![64, 64, 64],
            batch: 64,
            replay_capacity: 10_000,
            target_period: 100,
            adam: AdamConfig::default(),
            gamma: 0.3,
            weights: [1.0, 1.0],
            epsilon: EpsilonSchedule::constant(0.1),
            arena: Arena {
                x_min: 0.0,
                x_max: 1000.0,
                y_min: 0.0,
                y_max: 1000.0,
            },
        }
    }
}

/// Online network, its lagged target copy and the optimizer for one objective.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QNetwork {
    pub online: Mlp,
    pub target: Mlp,
    pub adam: AdamState,
    pub train_steps: u64,
}

impl QNetwork {
    pub fn new(online: Mlp, adam: AdamConfig) -> Self {
        Self {
            target: online.clone(),
            adam: AdamState::new(adam, &online),
            online,
            train_steps: 0,
        }
    }

    /// Copies the online weights into the target when the step count hits a
    /// multiple of `period`.
    pub fn sync_target(&mut self, period: u64) -> bool {
        if period > 0 && self.train_steps % period == 0 {
            self.target = self.online.clone();
            true
        } else {
            false
        }
    }
}

/// `y = r + gamma * max_a Q_target(s', a)` for each `(r, s')`.
pub fn td_targets(target: &Mlp, rewards: &[f64], next_inputs: &[Vec<f64>], gamma: f64) -> Result<Vec<f64>> {
    rewards
        .iter()
        .zip(next_inputs)
        .map(|(&r, x)| {
            let best = target.forward(x)?.into_iter().fold(f64::NEG_INFINITY, f64::max);
            Ok(r + gamma * best)
        })
        .collect()
}

/// One Adam step of `net` on the minibatch `indices`; returns the loss.
fn train_on(net: &mut QNetwork, buffer: &ReplayBuffer, indices: &[usize], reward: impl Fn(&StoredTransition) -> f64, input: impl Fn(&[f64; 3]) -> Vec<f64>, gamma: f64, period: u64) -> Result<f64> {
    let batch: Vec<&StoredTransition> = indices.iter().map(|&i| buffer.get(i)).collect();
    let inputs: Vec<Vec<f64>> = batch.iter().map(|t| input(&t.state)).collect();
    let next: Vec<Vec<f64>> = batch.iter().map(|t| input(&t.next_state)).collect();
    let rewards: Vec<f64> = batch.iter().map(|t| reward(t)).collect();
    let actions: Vec<usize> = batch.iter().map(|t| t.action).collect();
    let targets = td_targets(&net.target, &rewards, &next, gamma)?;
    let (loss, grads) = td_loss_and_grad(&net.online, &inputs, &actions, &targets)?;
    net.adam.apply(&mut net.online, &grads);
    net.train_steps += 1;
    net.sync_target(period);
    Ok(loss)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DnnAgent {
    index: usize,
    role: Role,
    energy: QNetwork,
    backlog: QNetwork,
    replay: ReplayBuffer,
    visits: VisitTable,
    /// Largest `|d'|` seen so far, used to scale the backlog input.
    d_scale: f64,
    params: DnnAgentParams,
    explore_rng: StreamRng,
    replay_rng: StreamRng,
}

impl DnnAgent {
    pub fn new(index: usize, params: DnnAgentParams, seed: u64) -> Self {
        let role = Role::for_agent(index);
        let mut sizes = vec![3];
        sizes.extend(&params.hidden);
        sizes.push(role.n_actions());
        let mut init = stream(seed, Stream::DnnInit(index as u32));
        let energy = QNetwork::new(Mlp::glorot(&sizes, &mut init), params.adam);
        let backlog = QNetwork::new(Mlp::glorot(&sizes, &mut init), params.adam);
        Self {
            index,
            role,
            energy,
            backlog,
            replay: ReplayBuffer::new(params.replay_capacity),
            visits: VisitTable::new(role.n_actions()),
            d_scale: 1.0,
            params,
            explore_rng: stream(seed, Stream::Explore(index as u32)),
            replay_rng: stream(seed, Stream::Replay(index as u32)),
        }
    }

    pub fn index(&self) -> usize {
        self.index
    }

    pub fn params(&self) -> &DnnAgentParams {
        &self.params
    }

    pub fn networks(&self) -> [&QNetwork; 2] {
        [&self.energy, &self.backlog]
    }

    pub fn replay(&self) -> &ReplayBuffer {
        &self.replay
    }

    fn raw(s: &QState) -> [f64; 3] {
        [s.q[0], s.q[1], s.d]
    }

    fn note_scale(&mut self, raw: &[f64; 3]) {
        self.d_scale = self.d_scale.max(raw[2].abs());
    }

    pub fn input(&self, raw: &[f64; 3]) -> Vec<f64> {
        normalize(&self.params.arena, self.d_scale, raw)
    }

    pub fn scalarized(&self, s: &QState) -> Result<Vec<f64>> {
        scalarize(&self.energy.online, &self.backlog.online, self.params.weights, &self.input(&Self::raw(s)))
    }

    /// Trains both objectives on independent minibatches once the buffer
    /// holds at least one batch. Returns the two losses, or `None` when the
    /// buffer is still underfull.
    pub fn train_step(&mut self) -> Result<Option<[f64; 2]>> {
        let n = self.params.batch;
        if self.replay.len() < n || n == 0 {
            return Ok(None);
        }
        let (arena, scale, gamma, period) = (self.params.arena, self.d_scale, self.params.gamma, self.params.target_period);
        let input = |r: &[f64; 3]| normalize(&arena, scale, r);
        let idx_e = self.replay.sample_indices(n, &mut self.replay_rng);
        let le = train_on(&mut self.energy, &self.replay, &idx_e, |t| t.reward.e, input, gamma, period)?;
        let idx_d = self.replay.sample_indices(n, &mut self.replay_rng);
        let ld = train_on(&mut self.backlog, &self.replay, &idx_d, |t| t.reward.d, input, gamma, period)?;
        Ok(Some([le, ld]))
    }
}

fn normalize(arena: &Arena, d_scale: f64, raw: &[f64; 3]) -> Vec<f64> {
    vec![(raw[0] - arena.x_min) / arena.width(), (raw[1] - arena.y_min) / arena.height(), raw[2] / d_scale]
}

fn scalarize(energy: &Mlp, backlog: &Mlp, weights: [f64; 2], x: &[f64]) -> Result<Vec<f64>> {
    let qe = energy.forward(x)?;
    let qd = backlog.forward(x)?;
    Ok(qe.iter().zip(&qd).map(|(e, d)| weights[0] * e + weights[1] * d).collect())
}

impl Agent for DnnAgent {
    fn role(&self) -> Role {
        self.role
    }

    fn act(&mut self, states: &QuantizedStateSet, state: usize, slot: u64) -> Decision {
        self.visits.grow_to(states.len());
        let raw = Self::raw(&states.get(state));
        self.note_scale(&raw);
        let eps = self.params.epsilon.at(slot);
        let x = self.input(&raw);
        let (energy, backlog, weights) = (&self.energy.online, &self.backlog.online, self.params.weights);
        visit_epsilon_greedy(&mut self.visits, state, eps, &mut self.explore_rng, || {
            // Input width is fixed at construction, so the forward pass cannot fail.
            scalarize(energy, backlog, weights, &x).map(|v| argmax(&v)).unwrap_or(0)
        })
    }

    fn learn(&mut self, states: &QuantizedStateSet, tr: &Transition) -> Result<LearnReport> {
        if tr.action >= self.role.n_actions() {
            return Err(Error::Contract(format!("action {} out of range for agent {}", tr.action, self.index)));
        }
        let state = Self::raw(&states.get(tr.from));
        let next_state = Self::raw(&states.get(tr.to));
        self.note_scale(&state);
        self.note_scale(&next_state);
        self.replay.push(StoredTransition {
            state,
            action: tr.action,
            reward: tr.reward,
            next_state,
        });
        let losses = self.train_step()?;
        Ok(LearnReport {
            updated: losses.is_some(),
            signal: losses,
            sizes: [self.replay.len(); 2],
        })
    }
}
