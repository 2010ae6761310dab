//! Independent oracles shared by the integration tests and the acceptance
//! suite. Nothing here calls the code paths it checks.
#![allow(dead_code)]

use std::collections::VecDeque;

use agmec_core::env::{
    self, achievable_rate, air_gain_from_draws, jittered_bits, terrestrial_gain_with_fading, Arena, EnvRng, EnvState,
    JointAction, NetworkConfig, SlotDraws, TaskProfile, Waveform,
};
use agmec_core::harness::{AnyAgent, SimConfig, Simulation};
use agmec_core::morl::{Feature, KernelAgentParams, Objective, KernelDictionary, KernelScales, QState, Role, VisitTable};
use agmec_core::rng::{stream, Stream, StreamRng};
use rand::Rng;

// ---------------------------------------------------------------------------
// Queue dynamics: packet-level FIFO simulation on an integer cycle clock.

/// FIFO of `(owner, bits)` segments.
#[derive(Debug, Clone, Default)]
struct Fifo {
    segs: VecDeque<(usize, u64)>,
}

impl Fifo {
    fn total(&self) -> u64 {
        self.segs.iter().map(|s| s.1).sum()
    }

    fn push(&mut self, owner: usize, bits: u64) {
        if bits > 0 {
            self.segs.push_back((owner, bits));
        }
    }

    fn take_front(&mut self, mut bits: u64) -> u64 {
        let mut moved = 0;
        while bits > 0 {
            let Some(front) = self.segs.front_mut() else { break };
            let k = front.1.min(bits);
            front.1 -= k;
            bits -= k;
            moved += k;
            if front.1 == 0 {
                self.segs.pop_front();
            }
        }
        moved
    }
}

/// Serves the queue packet by packet for `budget` cycles at `c` cycles per
/// bit. Returns the cycle count at which each owner's last bit finished, in
/// service order (`None` when that owner still has bits queued), and the
/// cycles used.
fn serve(q: &mut Fifo, budget: u64, c: u64, packet: u64) -> (Vec<(usize, Option<u64>)>, u64) {
    let mut clock = 0u64;
    let mut finished: Vec<(usize, Option<u64>)> = Vec::new();
    'outer: while let Some(&(owner, bits)) = q.segs.front() {
        let mut left = bits;
        while left > 0 {
            let p = left.min(packet);
            if clock + p * c <= budget {
                clock += p * c;
                left -= p;
            } else {
                let partial = (budget - clock) / c;
                clock += partial * c;
                left -= partial;
                q.segs.front_mut().unwrap().1 = left;
                finished.push((owner, None));
                break 'outer;
            }
        }
        q.segs.pop_front();
        finished.push((owner, Some(clock)));
    }
    // Owners behind the interruption point are unfinished too.
    for &(owner, _) in q.segs.iter().skip(1) {
        finished.push((owner, None));
    }
    (finished, clock)
}

/// Per-slot quantities the oracle predicts.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleSlot {
    pub ue_backlog: Vec<u64>,
    pub uav_backlog: u64,
    pub bs_backlog: u64,
    pub t_cp: Vec<f64>,
    pub t_trans: Vec<f64>,
    pub e_transmit: Vec<f64>,
    pub e_local: Vec<f64>,
    pub e_server: Vec<f64>,
    pub rate_limited: usize,
    pub saturated_servers: usize,
}

const SERVER_OWNER_CARRIED: usize = usize::MAX;

pub struct OracleWorld {
    cfg: NetworkConfig,
    uav: [f64; 3],
    ues: Vec<Fifo>,
    uav_q: Fifo,
    bs_q: Fifo,
    t: u64,
}

fn cycles(freq: f64, tau: f64) -> u64 {
    let v = freq * tau;
    assert_eq!(v.fract(), 0.0, "oracle needs an integral cycle budget");
    v as u64
}

const KING_MOVES: [(f64, f64); 8] = [
    (1.0, 0.0),
    (1.0, 1.0),
    (0.0, 1.0),
    (-1.0, 1.0),
    (-1.0, 0.0),
    (-1.0, -1.0),
    (0.0, -1.0),
    (1.0, -1.0),
];

impl OracleWorld {
    pub fn new(cfg: &NetworkConfig) -> Self {
        Self {
            cfg: cfg.clone(),
            uav: cfg.geometry.uav_start,
            ues: vec![Fifo::default(); cfg.num_ues()],
            uav_q: Fifo::default(),
            bs_q: Fifo::default(),
            t: 0,
        }
    }

    pub fn step(&mut self, codes: &[usize], draws: &SlotDraws) -> OracleSlot {
        let cfg = &self.cfg;
        let ch = &cfg.channel;
        let cp = &cfg.compute;
        let g = &cfg.geometry;
        let m = cfg.num_ues();
        let c = cp.cycles_per_bit as u64;
        let tau = cp.tau_s;

        let (dx, dy) = KING_MOVES[codes[0]];
        self.uav = [
            (self.uav[0] + dx * g.uav_step_m).clamp(g.arena.x_min, g.arena.x_max),
            (self.uav[1] + dy * g.uav_step_m).clamp(g.arena.y_min, g.arena.y_max),
            self.uav[2],
        ];

        let mut out = OracleSlot {
            ue_backlog: vec![0; m],
            uav_backlog: 0,
            bs_backlog: 0,
            t_cp: vec![0.0; m],
            t_trans: vec![0.0; m],
            e_transmit: vec![0.0; m],
            e_local: vec![0.0; m],
            e_server: vec![0.0; m],
            rate_limited: 0,
            saturated_servers: 0,
        };
        let mut to_uav = Vec::new();
        let mut to_bs = Vec::new();
        for i in 0..m {
            let ue = g.ue_pos[i];
            match codes[i + 1] {
                2 => {
                    let budget = cycles(cp.ue.freq_hz, tau);
                    let (_, used) = serve(&mut self.ues[i], budget, c, cp.packet_bits);
                    let t = if self.ues[i].total() == 0 { used as f64 / cp.ue.freq_hz } else { tau };
                    out.t_cp[i] = t;
                    out.e_local[i] = cp.ue.kappa * cp.ue.freq_hz.powi(3) * t;
                }
                choice => {
                    let rate = if choice == 0 {
                        achievable_rate(air_gain_from_draws(ch, self.uav, ue, draws.los_u[i], draws.air_fading[i]).unwrap().gain, ch)
                    } else {
                        let d = ((ue[0] - g.bs_pos[0]).powi(2) + (ue[1] - g.bs_pos[1]).powi(2) + (ue[2] - g.bs_pos[2]).powi(2)).sqrt();
                        achievable_rate(terrestrial_gain_with_fading(ch, d, draws.terrestrial_fading[i]).unwrap(), ch)
                    };
                    let packets = (rate * tau / cp.packet_bits as f64).floor() as u64;
                    let buffered = self.ues[i].total();
                    let bits = (packets * cp.packet_bits).min(buffered);
                    if bits < buffered {
                        out.rate_limited += 1;
                    }
                    self.ues[i].take_front(bits);
                    if bits > 0 {
                        out.t_trans[i] = bits as f64 / rate;
                        out.e_transmit[i] = ch.tx_power_w * bits as f64 / rate;
                    }
                    if choice == 0 { to_uav.push((i, bits)) } else { to_bs.push((i, bits)) }
                }
            }
        }
        for (queue, arrivals, cpu) in [(&mut self.uav_q, &to_uav, cp.uav), (&mut self.bs_q, &to_bs, cp.bs)] {
            // Relabel the carried backlog so it is not mistaken for an arrival.
            for s in queue.segs.iter_mut() {
                s.0 = SERVER_OWNER_CARRIED;
            }
            for &(i, bits) in arrivals.iter() {
                queue.segs.push_back((i, bits));
            }
            let budget = cycles(cpu.freq_hz, tau);
            let (finished, _) = serve(queue, budget, c, cp.packet_bits);
            if queue.total() > 0 {
                out.saturated_servers += 1;
            }
            // An arrival is done when its segment finished (zero-bit
            // arrivals finish when everything before them has).
            let mut prev_done = 0.0;
            let mut blocked = false;
            let finish_of = |ue: usize| -> Option<u64> {
                finished.iter().find(|f| f.0 == ue).and_then(|f| f.1)
            };
            let carried_done = finished
                .iter()
                .filter(|f| f.0 == SERVER_OWNER_CARRIED)
                .map(|f| f.1)
                .try_fold(0u64, |acc, f| f.map(|v| acc.max(v)));
            let mut last_clock = match carried_done {
                Some(v) => v,
                None => {
                    blocked = true;
                    0
                }
            };
            for &(i, bits) in arrivals.iter() {
                let done = if blocked {
                    None
                } else if bits == 0 {
                    Some(last_clock)
                } else {
                    finish_of(i)
                };
                let t = match done {
                    Some(clk) => {
                        last_clock = clk;
                        clk as f64 / cpu.freq_hz
                    }
                    None => {
                        blocked = true;
                        tau
                    }
                };
                out.t_cp[i] = t;
                out.e_server[i] = cpu.kappa * cpu.freq_hz.powi(3) * (t - prev_done);
                prev_done = t;
            }
        }
        for i in 0..m {
            out.ue_backlog[i] = self.ues[i].total();
        }
        out.uav_backlog = self.uav_q.total();
        out.bs_backlog = self.bs_q.total();
        for i in 0..m {
            let bits = jittered_bits(&cfg.tasks[i], self.t, draws.task_u[i]);
            self.ues[i].push(i, bits);
        }
        self.t += 1;
        out
    }
}

/// A random network on which links and servers are often the bottleneck.
pub fn random_network<R: Rng>(rng: &mut R) -> NetworkConfig {
    let mut cfg = NetworkConfig::default();
    let side = 3000.0;
    cfg.geometry.arena = Arena {
        x_min: 0.0,
        x_max: side,
        y_min: 0.0,
        y_max: side,
    };
    let pt = |rng: &mut R| [rng.random_range(0.0..side), rng.random_range(0.0..side), 0.0];
    cfg.geometry.bs_pos = pt(rng);
    let start = pt(rng);
    cfg.geometry.uav_start = [start[0], start[1], 100.0];
    cfg.geometry.ue_pos = (0..5).map(|_| pt(rng)).collect();
    cfg.tasks = (0..5)
        .map(|_| {
            let base = rng.random_range(0.0..2e6);
            TaskProfile {
                base_bits: base,
                peak_bits: base + rng.random_range(0.0..4e6),
                period: rng.random_range(1..500),
                phase: rng.random_range(0..500),
                waveform: if rng.random_bool(0.5) { Waveform::Square } else { Waveform::Triangular },
                jitter_fraction: rng.random_range(0.0..0.9),
            }
        })
        .collect();
    cfg
}

#[derive(Debug, Default)]
pub struct OracleReport {
    pub slots: usize,
    pub backlog_mismatches: usize,
    pub max_rel_time: f64,
    pub max_rel_energy: f64,
    pub rate_limited: usize,
    pub saturated_servers: usize,
    pub offloads: usize,
}

fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

/// Drives the environment and the oracle with identical random actions and
/// draws over `slots` slots, regenerating the network every `per_network`.
pub fn queue_oracle(seed: u64, slots: usize, per_network: usize) -> OracleReport {
    let mut rng = stream(seed, Stream::Explore(77));
    let mut report = OracleReport::default();
    let mut done = 0;
    while done < slots {
        let cfg = random_network(&mut rng);
        let mut env_rng = EnvRng::from_seed(rng.random());
        let mut state = EnvState::initial(&cfg);
        let mut oracle = OracleWorld::new(&cfg);
        for _ in 0..per_network.min(slots - done) {
            let mut codes = vec![rng.random_range(0..8)];
            codes.extend((0..5).map(|_| rng.random_range(0..3)));
            let draws = SlotDraws::sample(5, &mut env_rng);
            let action = JointAction::from_codes(&codes).unwrap();
            let (next, got) = env::step_with_draws(&state, &action, &cfg, &draws).unwrap();
            let want = oracle.step(&codes, &draws);
            if got.ue_backlog != want.ue_backlog || got.uav_backlog != want.uav_backlog || got.bs_backlog != want.bs_backlog {
                report.backlog_mismatches += 1;
            }
            for i in 0..5 {
                report.max_rel_time = report
                    .max_rel_time
                    .max(rel(got.times[i].t_cp, want.t_cp[i]))
                    .max(rel(got.times[i].t_trans, want.t_trans[i]));
                report.max_rel_energy = report
                    .max_rel_energy
                    .max(rel(got.energy[i].transmit, want.e_transmit[i]))
                    .max(rel(got.energy[i].local_cp, want.e_local[i]))
                    .max(rel(got.energy[i].server_cp, want.e_server[i]));
            }
            report.rate_limited += want.rate_limited;
            report.saturated_servers += want.saturated_servers;
            report.offloads += codes[1..].iter().filter(|&&a| a != 2).count();
            state = next;
            done += 1;
        }
    }
    report.slots = done;
    report
}

// ---------------------------------------------------------------------------
// ALD: residual by explicit least squares.

pub fn random_feature<R: Rng>(rng: &mut R) -> Feature {
    let mut a = [0.0; 3];
    a[rng.random_range(0..3)] = 1.0;
    Feature {
        q: [rng.random_range(0.0..1000.0), rng.random_range(0.0..1000.0), 100.0],
        d: rng.random_range(-16.0..0.0),
        a,
    }
}

/// `min_c |phi(x) - sum_i c_i phi(x_i)|^2` expanded in kernel values and
/// minimized through the normal equations `K c = k`.
pub fn least_squares_residual(dict: &[Feature], x: &Feature, scales: &KernelScales) -> f64 {
    use agmec_core::morl::kernel_eval;
    let n = dict.len();
    if n == 0 {
        return kernel_eval(x, x, scales);
    }
    let k = nalgebra::DMatrix::from_fn(n, n, |i, j| kernel_eval(&dict[i], &dict[j], scales));
    let kx = nalgebra::DVector::from_fn(n, |i, _| kernel_eval(x, &dict[i], scales));
    let c = k.clone().cholesky().expect("Gram matrix is positive definite").solve(&kx);
    kernel_eval(x, x, scales) - 2.0 * c.dot(&kx) + (c.transpose() * &k * &c)[(0, 0)]
}

pub fn min_gram_eigenvalue(dict: &KernelDictionary) -> f64 {
    let n = dict.len();
    let g = nalgebra::DMatrix::from_row_slice(n, n, &dict.gram());
    g.symmetric_eigen().eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}

#[derive(Debug, Default)]
pub struct AldReport {
    pub max_rel_err: f64,
    pub min_eigenvalue: f64,
    pub max_stored_delta: f64,
    pub admissions: usize,
}

/// Grows `count` random dictionaries (up to 50 entries each) and compares
/// every ALD residual against explicit least squares.
pub fn ald_oracle(seed: u64, count: usize) -> AldReport {
    let mut rng = stream(seed, Stream::Explore(91));
    let mut rep = AldReport {
        min_eigenvalue: f64::INFINITY,
        ..Default::default()
    };
    for _ in 0..count {
        let scales = KernelScales {
            sigma_pos: rng.random_range(50.0..400.0),
            sigma_backlog: rng.random_range(0.5..3.0),
            sigma_action: rng.random_range(0.5..2.0),
        };
        let mu0 = rng.random_range(0.05..0.9);
        let mut dict = KernelDictionary::new(scales, mu0);
        let target = rng.random_range(1..=50);
        let mut tries = 0;
        while dict.len() < target && tries < 2000 {
            tries += 1;
            let x = random_feature(&mut rng);
            let closed = dict.ald_delta(&x);
            let ls = least_squares_residual(dict.features(), &x, &scales);
            // Both are residuals of a unit-norm vector; compare against 1.
            rep.max_rel_err = rep.max_rel_err.max((closed - ls.max(0.0)).abs() / ls.abs().max(1.0));
            if dict.ald_test(&x).unwrap().admitted {
                rep.admissions += 1;
                rep.min_eigenvalue = rep.min_eigenvalue.min(min_gram_eigenvalue(&dict));
            }
        }
        for f in dict.features() {
            rep.max_stored_delta = rep.max_stored_delta.max(dict.ald_delta(f));
        }
    }
    rep
}

// ---------------------------------------------------------------------------
// Hand-rolled 1-step kernel R-learning agent.

/// Textbook 1-step multi-objective kernel R-learning, written without the
/// n-step window machinery.
#[derive(Clone)]
pub struct OneStepAgent {
    pub actions: Vec<[f64; 3]>,
    pub dicts: [KernelDictionary; 2],
    pub w: [Vec<f64>; 2],
    pub rbar: [f64; 2],
    pub visits: VisitTable,
    pub rng: StreamRng,
    pub alpha: f64,
    pub k_r: f64,
    pub gamma: f64,
    pub weights: [f64; 2],
    /// Linear decay `(start, end, slots)`.
    pub eps: (f64, f64, u64),
}

fn dotp(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl OneStepAgent {
    /// Agent `m` with the same exploration stream as the production agent.
    pub fn new(m: usize, seed: u64, params: &KernelAgentParams) -> Self {
        let actions = Role::for_agent(m).action_encodings();
        Self {
            visits: VisitTable::new(actions.len()),
            actions,
            dicts: [KernelDictionary::new(params.scales, params.mu0), KernelDictionary::new(params.scales, params.mu0)],
            w: [Vec::new(), Vec::new()],
            rbar: [0.0; 2],
            rng: stream(seed, Stream::Explore(m as u32)),
            alpha: params.alpha,
            k_r: params.k_r,
            gamma: params.gamma,
            weights: params.weights,
            eps: (params.epsilon.start, params.epsilon.end, params.epsilon.decay_slots),
        }
    }

    fn q(&self, k: usize, s: &QState, a: usize) -> f64 {
        let x = Feature::new(*s, self.actions[a]);
        dotp(&self.w[k], &self.dicts[k].kernel_vector(&x))
    }

    fn q_row(&self, k: usize, s: &QState) -> Vec<f64> {
        self.dicts[k]
            .kernel_vectors_for_actions(s, &self.actions)
            .iter()
            .map(|f| dotp(&self.w[k], f))
            .collect()
    }

    pub fn greedy(&self, s: &QState) -> usize {
        let qe = self.q_row(0, s);
        let qd = self.q_row(1, s);
        let mut best = 0;
        let mut best_v = f64::NEG_INFINITY;
        for a in 0..self.actions.len() {
            let v = self.weights[0] * qe[a] + self.weights[1] * qd[a];
            if v > best_v {
                best = a;
                best_v = v;
            }
        }
        best
    }

    fn epsilon(&self, slot: u64) -> f64 {
        let (start, end, slots) = self.eps;
        if slots == 0 {
            start
        } else if slot >= slots {
            end
        } else {
            start + (end - start) * (slot as f64 / slots as f64)
        }
    }

    pub fn act(&mut self, slot: u64, row: usize, s: &QState) -> (usize, bool) {
        self.visits.grow_to(row + 1);
        let u: f64 = self.rng.random();
        let free = self.visits.unvisited(row);
        let (a, explored) = if u < self.epsilon(slot) && !free.is_empty() {
            (free[self.rng.random_range(0..free.len())], true)
        } else {
            (self.greedy(s), false)
        };
        self.visits.mark(row, a);
        (a, explored)
    }

    pub fn learn(&mut self, s: &QState, a: usize, r: [f64; 2], s2: &QState, explored: bool) {
        let x = Feature::new(*s, self.actions[a]);
        for k in 0..2 {
            let f = self.dicts[k].kernel_vector(&x);
            let q = dotp(&self.w[k], &f);
            let best = self.q_row(k, s2).into_iter().fold(f64::NEG_INFINITY, f64::max);
            let best = if best.is_finite() { best } else { 0.0 };
            let delta = r[k] + self.gamma * best - self.rbar[k] - q;
            for (w, fi) in self.w[k].iter_mut().zip(&f) {
                *w += self.alpha * delta * fi;
            }
        }
        if !explored {
            let star = self.greedy(s2);
            let next = [self.q(0, s2, star), self.q(1, s2, star)];
            let cur = [self.q(0, s, a), self.q(1, s, a)];
            for k in 0..2 {
                self.rbar[k] = self.rbar[k] * (1.0 - self.k_r) + self.k_r * (r[k] + next[k] - cur[k]);
            }
        }
        for k in 0..2 {
            if self.dicts[k].ald_test(&x).unwrap().admitted {
                self.w[k].push(0.0);
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Gradients against central finite differences.

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `|a - b| / max(|a|, |b|)` on whole vectors.
pub fn vector_rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let scale = norm(a).max(norm(b));
    if scale == 0.0 {
        0.0
    } else {
        norm(&diff) / scale
    }
}

/// Mean squared TD loss evaluated through forward passes only.
fn forward_loss(net: &agmec_core::dnn::Mlp, xs: &[Vec<f64>], acts: &[usize], ys: &[f64]) -> f64 {
    xs.iter()
        .zip(acts)
        .zip(ys)
        .map(|((x, &a), y)| (y - net.forward(x).unwrap()[a]).powi(2))
        .sum::<f64>()
        / xs.len() as f64
}

/// Worst relative gradient error over `count` random small networks.
pub fn dnn_gradient_check(seed: u64, count: usize) -> f64 {
    use agmec_core::dnn::{td_loss_and_grad, Mlp};
    let mut rng = stream(seed, Stream::DnnInit(99));
    let mut worst: f64 = 0.0;
    for _ in 0..count {
        let mut sizes = vec![rng.random_range(1..5)];
        for _ in 0..rng.random_range(1..3) {
            sizes.push(rng.random_range(2..7));
        }
        sizes.push(rng.random_range(1..5));
        let mut net = Mlp::glorot(&sizes, &mut rng);
        // Non-zero biases so every parameter matters.
        let p: Vec<f64> = net.params_flat().iter().map(|w| w + rng.random_range(-0.3..0.3)).collect();
        net.set_params_flat(&p);
        let n = rng.random_range(1..9);
        let xs: Vec<Vec<f64>> = (0..n).map(|_| (0..sizes[0]).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let acts: Vec<usize> = (0..n).map(|_| rng.random_range(0..*sizes.last().unwrap())).collect();
        let ys: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();

        let (_, grads) = td_loss_and_grad(&net, &xs, &acts, &ys).unwrap();
        let analytic = grads.flatten();
        let h = 1e-6;
        let numeric: Vec<f64> = (0..p.len())
            .map(|i| {
                let mut probe = net.clone();
                let mut q = p.clone();
                q[i] = p[i] + h;
                probe.set_params_flat(&q);
                let up = forward_loss(&probe, &xs, &acts, &ys);
                q[i] = p[i] - h;
                probe.set_params_flat(&q);
                let down = forward_loss(&probe, &xs, &acts, &ys);
                (up - down) / (2.0 * h)
            })
            .collect();
        worst = worst.max(vector_rel_err(&analytic, &numeric));
    }
    worst
}

/// Compares the agent's weight step `Δw / α` with `-∇_w ½(y - w·f)²` where
/// the target `y = g + γ max_a' Q(s', a') - ρ` is frozen at the pre-update
/// weights. Returns the worst relative error over `count` random cases.
pub fn kernel_semi_gradient_check(seed: u64, count: usize) -> f64 {
    use agmec_core::env::RewardVector;
    use agmec_core::morl::KernelAgent;
    let mut rng = stream(seed, Stream::Explore(55));
    let mut worst: f64 = 0.0;
    for _ in 0..count {
        let params = KernelAgentParams {
            alpha: rng.random_range(0.001..0.5),
            gamma: rng.random_range(0.0..0.99),
            ..KernelAgentParams::default()
        };
        let index = rng.random_range(0..3);
        let mut agent = KernelAgent::new(index, params.clone(), seed);
        let n_actions = Role::for_agent(index).n_actions();
        let rand_state = |rng: &mut StreamRng| QState::new([rng.random_range(0.0..600.0), rng.random_range(0.0..600.0), 100.0], rng.random_range(-3.0..0.0));
        for _ in 0..rng.random_range(2..30) {
            let s = rand_state(&mut rng);
            agent.grow_dictionaries(s, rng.random_range(0..n_actions)).unwrap();
        }
        for which in [Objective::Energy, Objective::Backlog] {
            let v = agent.value_mut(which);
            for w in v.weights.iter_mut() {
                *w = rng.random_range(-3.0..3.0);
            }
        }
        agent.set_avg_reward(RewardVector::new(rng.random_range(-1.0..0.0), rng.random_range(-1.0..0.0)));
        let (s, a, s2) = (rand_state(&mut rng), rng.random_range(0..n_actions), rand_state(&mut rng));
        let g = RewardVector::new(rng.random_range(-3.0..0.0), rng.random_range(-3.0..0.0));

        let before = agent.clone();
        agent.update_weights(s, a, s2, g);
        for (k, which) in [Objective::Energy, Objective::Backlog].into_iter().enumerate() {
            let v0 = before.value(which);
            let x = before.feature(s, a);
            let f = v0.dict.kernel_vector(&x);
            let best = (0..n_actions).map(|b| before.q_value(which, s2, b)).fold(f64::NEG_INFINITY, f64::max);
            let y = g.as_array()[k] + params.gamma * best - before.avg_reward().as_array()[k];
            let half_sq = |w: &[f64]| 0.5 * (y - dotp(w, &f)).powi(2);
            // Quadratic in w, so the step size only trades off rounding.
            let h = 1e-3;
            let neg_grad: Vec<f64> = (0..f.len())
                .map(|i| {
                    let mut up = v0.weights.clone();
                    let mut down = v0.weights.clone();
                    up[i] += h;
                    down[i] -= h;
                    -(half_sq(&up) - half_sq(&down)) / (2.0 * h)
                })
                .collect();
            let step: Vec<f64> = agent
                .value(which)
                .weights
                .iter()
                .zip(&v0.weights)
                .map(|(w1, w0)| (w1 - w0) / params.alpha)
                .collect();
            worst = worst.max(vector_rel_err(&step, &neg_grad));
        }
    }
    worst
}

/// Steps `sim` for `slots` slots alongside hand-rolled 1-step agents and
/// returns the first slot at which anything differs.
pub fn one_step_divergence(config: &SimConfig, seed: u64, slots: u64) -> Option<String> {
    let mut sim = Simulation::new(config, seed).unwrap();
    let params = config.kernel_params();
    let mut reference: Vec<OneStepAgent> = (0..sim.agents().len()).map(|m| OneStepAgent::new(m, seed, &params)).collect();
    for t in 0..slots {
        let from = sim.current_state();
        let rec = sim.step().unwrap();
        let to = sim.current_state();
        let states = sim.states();
        let reward = sim.learning_reward(&rec.outcome).as_array();
        for (m, r) in reference.iter_mut().enumerate() {
            let (a, explored) = r.act(t, from, &states.get(from));
            if (a, explored) != (rec.actions[m], rec.explored[m]) {
                return Some(format!("slot {t} agent {m}: decision {a}/{explored} vs {}/{}", rec.actions[m], rec.explored[m]));
            }
            r.learn(&states.get(from), a, reward, &states.get(to), explored);
            let AnyAgent::Kernel(k) = &sim.agents()[m] else { unreachable!() };
            let same = k.value(Objective::Energy).weights == r.w[0]
                && k.value(Objective::Backlog).weights == r.w[1]
                && k.avg_reward().as_array() == r.rbar;
            if !same {
                return Some(format!("slot {t} agent {m}: weights or average reward differ"));
            }
        }
    }
    None
}

