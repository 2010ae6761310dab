use serde::{Deserialize, Serialize};

use super::kernel::{dot, Feature, KernelDictionary, KernelScales};
use super::nstep::{n_step_return, RewardBuffer, WindowOrder};
use super::quantize::{QState, QuantizedStateSet};
use super::visit::VisitTable;
use super::{visit_epsilon_greedy, Agent, Decision, EpsilonSchedule, LearnReport, Role, Transition};
use crate::env::RewardVector;
use crate::rng::{stream, Stream, StreamRng};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Objective {
    Energy,
    Backlog,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelAgentParams {
    pub alpha: f64,
    pub k_r: f64,
    pub gamma: f64,
    pub n_step: usize,
    /// Scalarization weights `[w_e, w_d]`.
    pub weights: [f64; 2],
    pub epsilon: EpsilonSchedule,
    pub scales: KernelScales,
    pub mu0: f64,
    /// Horizon `T` that truncates the last n-step windows.
    pub horizon: u64,
    pub window_order: WindowOrder,
}

impl Default for KernelAgentParams {
    fn default() -> Self {
        Self {
            alpha: 0.01,
            k_r: 0.01,
            gamma: 0.3,
            n_step: 5,
            weights: [1.0, 1.0],
            epsilon: EpsilonSchedule::constant(0.1),
            scales: KernelScales::default(),
            mu0: 0.82,
            horizon: u64::MAX,
            window_order: WindowOrder::OldestFirst,
        }
    }
}

/// A kernel dictionary together with the weights of `Q = w^T f`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelValue {
    pub dict: KernelDictionary,
    pub weights: Vec<f64>,
}

impl KernelValue {
    fn new(scales: KernelScales, mu0: f64) -> Self {
        Self {
            dict: KernelDictionary::new(scales, mu0),
            weights: Vec::new(),
        }
    }

    pub fn q(&self, x: &Feature) -> f64 {
        dot(&self.weights, &self.dict.kernel_vector(x))
    }

    pub fn q_all(&self, s: &QState, actions: &[[f64; 3]]) -> Vec<f64> {
        self.dict
            .kernel_vectors_for_actions(s, actions)
            .iter()
            .map(|f| dot(&self.weights, f))
            .collect()
    }

    fn admit(&mut self, x: &Feature) -> Result<bool> {
        let out = self.dict.ald_test(x)?;
        if out.admitted {
            self.weights.push(0.0);
        }
        Ok(out.admitted)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelAgent {
    index: usize,
    role: Role,
    actions: Vec<[f64; 3]>,
    energy: KernelValue,
    backlog: KernelValue,
    avg_reward: RewardVector,
    rewards: RewardBuffer,
    visits: VisitTable,
    params: KernelAgentParams,
    rng: StreamRng,
}

impl KernelAgent {
    /// Agent `index` (0 is the UAV) with its exploration stream drawn from `seed`.
    pub fn new(index: usize, params: KernelAgentParams, seed: u64) -> Self {
        let role = Role::for_agent(index);
        Self {
            index,
            role,
            actions: role.action_encodings(),
            energy: KernelValue::new(params.scales, params.mu0),
            backlog: KernelValue::new(params.scales, params.mu0),
            avg_reward: RewardVector::zero(),
            rewards: RewardBuffer::new(params.n_step),
            visits: VisitTable::new(role.n_actions()),
            params,
            rng: stream(seed, Stream::Explore(index as u32)),
        }
    }

    pub fn index(&self) -> usize {
        self.index
    }

    pub fn params(&self) -> &KernelAgentParams {
        &self.params
    }

    pub fn value(&self, which: Objective) -> &KernelValue {
        match which {
            Objective::Energy => &self.energy,
            Objective::Backlog => &self.backlog,
        }
    }

    pub fn value_mut(&mut self, which: Objective) -> &mut KernelValue {
        match which {
            Objective::Energy => &mut self.energy,
            Objective::Backlog => &mut self.backlog,
        }
    }

    pub fn avg_reward(&self) -> RewardVector {
        self.avg_reward
    }

    pub fn set_avg_reward(&mut self, r: RewardVector) {
        self.avg_reward = r;
    }

    pub fn visits(&self) -> &VisitTable {
        &self.visits
    }

    pub fn action_vector(&self, action: usize) -> [f64; 3] {
        self.actions[action]
    }

    pub fn feature(&self, s: QState, action: usize) -> Feature {
        Feature::new(s, self.actions[action])
    }

    pub fn q_value(&self, which: Objective, s: QState, action: usize) -> f64 {
        self.value(which).q(&self.feature(s, action))
    }

    /// Scalarized values `w_e Q_e + w_d Q_d` for every action at `s`.
    pub fn scalarized(&self, s: &QState) -> Vec<f64> {
        scalarize(&self.energy, &self.backlog, &self.actions, self.params.weights, s)
    }

    /// Greedy action; ties go to the lowest index.
    pub fn select_action(&self, s: &QState) -> usize {
        argmax(&self.scalarized(s))
    }

    /// Visit-table epsilon-greedy: explores only never-tried actions of row
    /// `row` and falls back to the greedy action once the row is complete.
    pub fn epsilon_greedy(&mut self, row: usize, s: &QState, slot: u64) -> Decision {
        let eps = self.params.epsilon.at(slot);
        let (energy, backlog, actions, weights) = (&self.energy, &self.backlog, &self.actions, self.params.weights);
        visit_epsilon_greedy(&mut self.visits, row, eps, &mut self.rng, || {
            argmax(&scalarize(energy, backlog, actions, weights, s))
        })
    }

    /// Semi-gradient R-learning step on both weight vectors for the sample
    /// `(s_t, a_t)` with return `g` and bootstrap state `s_next`. Returns the
    /// two TD errors.
    pub fn update_weights(&mut self, s_t: QState, a_t: usize, s_next: QState, g: RewardVector) -> [f64; 2] {
        let x = self.feature(s_t, a_t);
        let (alpha, gamma) = (self.params.alpha, self.params.gamma);
        let rbar = self.avg_reward;
        let actions = self.actions.clone();
        let mut td = [0.0; 2];
        for (k, (value, ret, avg)) in [(&mut self.energy, g.e, rbar.e), (&mut self.backlog, g.d, rbar.d)]
            .into_iter()
            .enumerate()
        {
            let f = value.dict.kernel_vector(&x);
            let q_t = dot(&value.weights, &f);
            let max_next = value.q_all(&s_next, &actions).into_iter().fold(f64::NEG_INFINITY, f64::max);
            let max_next = if max_next.is_finite() { max_next } else { 0.0 };
            let delta = ret + gamma * max_next - avg - q_t;
            for (w, fi) in value.weights.iter_mut().zip(&f) {
                *w += alpha * delta * fi;
            }
            td[k] = delta;
        }
        td
    }

    /// Average-reward update, only valid for non-exploratory actions.
    pub fn update_avg_reward(&mut self, s_t: QState, a_t: usize, s_next: QState, g: RewardVector, explored: bool) -> Result<()> {
        if explored {
            return Err(Error::Contract("average reward must not be updated after an exploratory action".into()));
        }
        let star = self.select_action(&s_next);
        let k = self.params.k_r;
        let next = [self.q_value(Objective::Energy, s_next, star), self.q_value(Objective::Backlog, s_next, star)];
        let cur = [self.q_value(Objective::Energy, s_t, a_t), self.q_value(Objective::Backlog, s_t, a_t)];
        let r = self.avg_reward.as_array();
        let g = g.as_array();
        let upd: [f64; 2] = std::array::from_fn(|i| r[i] * (1.0 - k) + k * (g[i] + next[i] - cur[i]));
        self.avg_reward = RewardVector::from_array(upd);
        Ok(())
    }

    /// ALD tests of `(s_t, a_t)` against both dictionaries; new weights start at zero.
    pub fn grow_dictionaries(&mut self, s_t: QState, a_t: usize) -> Result<[bool; 2]> {
        let x = self.feature(s_t, a_t);
        Ok([self.energy.admit(&x)?, self.backlog.admit(&x)?])
    }

    pub fn dictionary_sizes(&self) -> [usize; 2] {
        [self.energy.dict.len(), self.backlog.dict.len()]
    }

    pub fn n_step_return(&self, slot: u64) -> Result<Option<RewardVector>> {
        n_step_return(
            &self.rewards,
            self.params.gamma,
            self.params.n_step,
            slot,
            self.params.horizon,
            self.params.window_order,
        )
    }
}

fn scalarize(energy: &KernelValue, backlog: &KernelValue, actions: &[[f64; 3]], weights: [f64; 2], s: &QState) -> Vec<f64> {
    let qe = energy.q_all(s, actions);
    let qd = backlog.q_all(s, actions);
    let [we, wd] = weights;
    qe.iter().zip(&qd).map(|(e, d)| we * e + wd * d).collect()
}

pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    let mut best_v = f64::NEG_INFINITY;
    for (i, &v) in values.iter().enumerate() {
        if v > best_v {
            best = i;
            best_v = v;
        }
    }
    best
}

impl Agent for KernelAgent {
    fn role(&self) -> Role {
        self.role
    }

    fn act(&mut self, states: &QuantizedStateSet, state: usize, slot: u64) -> Decision {
        self.visits.grow_to(states.len());
        let s = states.get(state);
        self.epsilon_greedy(state, &s, slot)
    }

    fn learn(&mut self, states: &QuantizedStateSet, tr: &Transition) -> Result<LearnReport> {
        self.rewards.push(tr.reward);
        let s_t = states.get(tr.from);
        let s_next = states.get(tr.to);
        let mut report = LearnReport::default();
        if let Some(g) = self.n_step_return(tr.slot)? {
            report.signal = Some(self.update_weights(s_t, tr.action, s_next, g));
            report.updated = true;
            if !tr.explored {
                self.update_avg_reward(s_t, tr.action, s_next, g, false)?;
            }
        }
        self.grow_dictionaries(s_t, tr.action)?;
        report.sizes = self.dictionary_sizes();
        Ok(report)
    }
}
