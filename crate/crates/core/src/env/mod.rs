//! The physical world: channels, FIFO queues, energy accounting and the
//! seeded slot transition.

pub mod channel;
pub mod queue;
pub mod tasks;

use serde::{Deserialize, Serialize};

use crate::rng::{stream, Stream, StreamRng};
use crate::{Error, Result};

pub use channel::{
    achievable_rate, air_gain, air_gain_from_draws, deliverable_bits, los_probability, terrestrial_gain,
    terrestrial_gain_with_fading, AirGain, ChannelParams,
};
pub use queue::{local_process_step, server_process_step, Processor, TaskQueue};
pub use tasks::{generate_tasks, jittered_bits, TaskProfile, Waveform};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComputeParams {
    pub ue: Processor,
    pub uav: Processor,
    pub bs: Processor,
    pub cycles_per_bit: f64,
    pub tau_s: f64,
    pub packet_bits: u64,
}

impl Default for ComputeParams {
    fn default() -> Self {
        Self {
            ue: Processor { freq_hz: 8e8, kappa: 1e-28 },
            uav: Processor { freq_hz: 1.6e9, kappa: 1e-27 },
            bs: Processor { freq_hz: 1.8e9, kappa: 1e-28 },
            cycles_per_bit: 1e3,
            tau_s: 2.0,
            packet_bits: 1000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Arena {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Arena {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        (self.x_min..=self.x_max).contains(&x) && (self.y_min..=self.y_max).contains(&y)
    }

    pub fn clamp(&self, x: f64, y: f64) -> (f64, f64) {
        (x.clamp(self.x_min, self.x_max), y.clamp(self.y_min, self.y_max))
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    /// Initial UAV position; `uav_start[2]` is the constant altitude.
    pub uav_start: [f64; 3],
    pub bs_pos: [f64; 3],
    pub ue_pos: Vec<[f64; 3]>,
    pub arena: Arena,
    pub uav_step_m: f64,
}

impl Geometry {
    pub fn altitude(&self) -> f64 {
        self.uav_start[2]
    }
}

/// Flight directions, counter-clockwise from east.
///
/// Diagonal moves displace the UAV by one step along *both* axes, so the
/// reachable positions stay on a square lattice and revisit exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    East,
    NorthEast,
    North,
    NorthWest,
    West,
    SouthWest,
    South,
    SouthEast,
}

impl Direction {
    pub const ALL: [Direction; 8] = [
        Direction::East,
        Direction::NorthEast,
        Direction::North,
        Direction::NorthWest,
        Direction::West,
        Direction::SouthWest,
        Direction::South,
        Direction::SouthEast,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    /// Lattice displacement in units of one step.
    pub fn grid_offset(self) -> (f64, f64) {
        match self {
            Direction::East => (1.0, 0.0),
            Direction::NorthEast => (1.0, 1.0),
            Direction::North => (0.0, 1.0),
            Direction::NorthWest => (-1.0, 1.0),
            Direction::West => (-1.0, 0.0),
            Direction::SouthWest => (-1.0, -1.0),
            Direction::South => (0.0, -1.0),
            Direction::SouthEast => (1.0, -1.0),
        }
    }

    /// Unit heading vector.
    pub fn heading(self) -> (f64, f64) {
        let angle = self.index() as f64 * std::f64::consts::FRAC_PI_4;
        (angle.cos(), angle.sin())
    }
}

/// Mutually exclusive per-UE choice; the order matches the one-hot
/// `[alpha_UAV, alpha_BS, alpha_UE]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Offload {
    Uav,
    Bs,
    Local,
}

impl Offload {
    pub const ALL: [Offload; 3] = [Offload::Uav, Offload::Bs, Offload::Local];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn one_hot(self) -> [f64; 3] {
        let mut v = [0.0; 3];
        v[self.index()] = 1.0;
        v
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JointAction {
    pub uav: Direction,
    pub ues: Vec<Offload>,
}

impl JointAction {
    /// Builds an action from agent action indices (`codes[0]` is the UAV).
    pub fn from_codes(codes: &[usize]) -> Result<Self> {
        let (&first, rest) = codes
            .split_first()
            .ok_or_else(|| Error::Contract("empty joint action".into()))?;
        let uav = Direction::from_index(first)
            .ok_or_else(|| Error::Contract(format!("UAV action index {first} out of range")))?;
        let ues = rest
            .iter()
            .map(|&c| Offload::from_index(c).ok_or_else(|| Error::Contract(format!("offload index {c} out of range"))))
            .collect::<Result<Vec<_>>>()?;
        Ok(JointAction { uav, ues })
    }

    pub fn codes(&self) -> Vec<usize> {
        std::iter::once(self.uav.index()).chain(self.ues.iter().map(|o| o.index())).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub channel: ChannelParams,
    pub compute: ComputeParams,
    pub geometry: Geometry,
    pub tasks: Vec<TaskProfile>,
}

impl NetworkConfig {
    pub fn num_ues(&self) -> usize {
        self.geometry.ue_pos.len()
    }

    pub fn validate(&self) -> Result<()> {
        self.channel.validate()?;
        let c = &self.compute;
        for (key, v) in [
            ("f_ue_hz", c.ue.freq_hz),
            ("f_uav_hz", c.uav.freq_hz),
            ("f_bs_hz", c.bs.freq_hz),
            ("kappa_ue", c.ue.kappa),
            ("kappa_uav", c.uav.kappa),
            ("kappa_bs", c.bs.kappa),
            ("cycles_per_bit", c.cycles_per_bit),
            ("tau_s", c.tau_s),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(key, format!("must be positive and finite, got {v}")));
            }
        }
        if c.packet_bits == 0 {
            return Err(Error::config("packet_bits", "must be a positive integer"));
        }
        let g = &self.geometry;
        if !(g.altitude() > 0.0) {
            return Err(Error::config("uav_altitude_m", "must be positive"));
        }
        if !(g.uav_step_m > 0.0) {
            return Err(Error::config("uav_step_m", "must be positive"));
        }
        if !(g.arena.x_max > g.arena.x_min && g.arena.y_max > g.arena.y_min) {
            return Err(Error::config("arena_width_m", "arena must have positive extent"));
        }
        if !g.arena.contains(g.uav_start[0], g.uav_start[1]) {
            return Err(Error::config("uav_x0_m", "UAV start lies outside the arena"));
        }
        if g.ue_pos.is_empty() {
            return Err(Error::config("num_ues", "need at least one UE"));
        }
        for p in &g.ue_pos {
            let d = ((p[0] - g.bs_pos[0]).powi(2) + (p[1] - g.bs_pos[1]).powi(2)).sqrt();
            if !(d > 0.0) {
                return Err(Error::config("ue_x_m", "a UE coincides with the BS"));
            }
        }
        if self.tasks.len() != g.ue_pos.len() {
            return Err(Error::config("task_peak_bits", "need one task profile per UE"));
        }
        for t in &self.tasks {
            t.validate()?;
        }
        Ok(())
    }
}

impl Default for NetworkConfig {
    /// Five UEs in a 3.2 km x 2 km strip: UEs 1-2 form a light cluster near
    /// the BS at the west end, UEs 3-5 a heavy cluster 2 km east whose
    /// production peaks every 400 slots. At these distances the uplink rate,
    /// and with it the UAV position, matters.
    fn default() -> Self {
        let light = TaskProfile {
            base_bits: 1e5,
            peak_bits: 5e5,
            period: 400,
            phase: 200,
            waveform: Waveform::Triangular,
            jitter_fraction: 0.0,
        };
        let heavy = TaskProfile {
            base_bits: 4e5,
            peak_bits: 2.4e6,
            period: 400,
            phase: 0,
            waveform: Waveform::Triangular,
            jitter_fraction: 0.0,
        };
        Self {
            channel: ChannelParams::default(),
            compute: ComputeParams::default(),
            geometry: Geometry {
                uav_start: [800.0, 1000.0, 100.0],
                bs_pos: [800.0, 1000.0, 0.0],
                ue_pos: vec![
                    [550.0, 1150.0, 0.0],
                    [600.0, 800.0, 0.0],
                    [2750.0, 1100.0, 0.0],
                    [2850.0, 950.0, 0.0],
                    [2700.0, 850.0, 0.0],
                ],
                arena: Arena {
                    x_min: 0.0,
                    x_max: 3200.0,
                    y_min: 0.0,
                    y_max: 2000.0,
                },
                uav_step_m: 40.0,
            },
            tasks: vec![light.clone(), light, heavy.clone(), heavy.clone(), heavy],
        }
    }
}

/// The three environment random streams.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvRng {
    pub fading: StreamRng,
    pub los: StreamRng,
    pub tasks: StreamRng,
}

impl EnvRng {
    pub fn from_seed(seed: u64) -> Self {
        Self {
            fading: stream(seed, Stream::EnvFading),
            los: stream(seed, Stream::EnvLos),
            tasks: stream(seed, Stream::EnvTasks),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvState {
    pub uav_pos: [f64; 3],
    pub ue_queues: Vec<TaskQueue>,
    pub uav_queue: TaskQueue,
    pub bs_queue: TaskQueue,
    /// Index of the next slot to execute.
    pub t: u64,
}

impl EnvState {
    pub fn initial(cfg: &NetworkConfig) -> Self {
        Self {
            uav_pos: cfg.geometry.uav_start,
            ue_queues: vec![TaskQueue::default(); cfg.num_ues()],
            uav_queue: TaskQueue::default(),
            bs_queue: TaskQueue::default(),
            t: 0,
        }
    }

    /// `D_t`: unprocessed carried bits over every queue (fresh production excluded).
    pub fn total_backlog(&self) -> u64 {
        self.ue_queues.iter().map(|q| q.carried_bits).sum::<u64>() + self.uav_queue.carried_bits + self.bs_queue.carried_bits
    }

    /// Every bit currently held anywhere, fresh production included.
    pub fn bits_in_system(&self) -> u64 {
        self.ue_queues.iter().map(|q| q.total()).sum::<u64>() + self.uav_queue.total() + self.bs_queue.total()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RewardVector {
    /// `-E_t` in joules (or a scaled unit once normalized for learning).
    pub e: f64,
    /// `-D_t` in bits (or a scaled unit).
    pub d: f64,
}

impl RewardVector {
    pub fn new(e: f64, d: f64) -> Self {
        Self { e, d }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn scaled(self, k: f64) -> Self {
        Self::new(self.e * k, self.d * k)
    }

    pub fn add(self, o: Self) -> Self {
        Self::new(self.e + o.e, self.d + o.d)
    }

    pub fn as_array(self) -> [f64; 2] {
        [self.e, self.d]
    }

    pub fn from_array(a: [f64; 2]) -> Self {
        Self::new(a[0], a[1])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct UeEnergy {
    pub transmit: f64,
    pub local_cp: f64,
    pub server_cp: f64,
}

impl UeEnergy {
    pub fn total(&self) -> f64 {
        self.transmit + self.local_cp + self.server_cp
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct UeTimes {
    /// Local processing or server-attributed processing time.
    pub t_cp: f64,
    pub t_trans: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub reward: RewardVector,
    pub energy: Vec<UeEnergy>,
    /// Per-UE carried backlog after the slot.
    pub ue_backlog: Vec<u64>,
    pub uav_backlog: u64,
    pub bs_backlog: u64,
    pub times: Vec<UeTimes>,
    pub rates: Vec<f64>,
    pub offloaded_bits: Vec<u64>,
    pub processed_bits: u64,
    pub produced_bits: u64,
    pub energy_total: f64,
    pub backlog_total: u64,
}

/// Channel draws for one slot, one entry per UE.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotDraws {
    pub terrestrial_fading: Vec<f64>,
    pub air_fading: Vec<f64>,
    pub los_u: Vec<f64>,
    pub task_u: Vec<f64>,
}

impl SlotDraws {
    /// Draws everything a slot needs regardless of the action taken, so the
    /// environment streams never depend on agent behaviour.
    pub fn sample(num_ues: usize, rng: &mut EnvRng) -> Self {
        use rand::Rng;
        let mut terrestrial_fading = Vec::with_capacity(num_ues);
        let mut air_fading = Vec::with_capacity(num_ues);
        for _ in 0..num_ues {
            terrestrial_fading.push(channel::draw_fading(&mut rng.fading));
            air_fading.push(channel::draw_fading(&mut rng.fading));
        }
        let los_u = (0..num_ues).map(|_| rng.los.random()).collect();
        let task_u = (0..num_ues).map(|_| rng.tasks.random_range(-1.0..1.0)).collect();
        Self {
            terrestrial_fading,
            air_fading,
            los_u,
            task_u,
        }
    }
}

/// Moves the UAV one step in `dir`, clamped to the arena.
pub fn move_uav(pos: [f64; 3], dir: Direction, geometry: &Geometry) -> [f64; 3] {
    let (dx, dy) = dir.grid_offset();
    let (x, y) = geometry
        .arena
        .clamp(pos[0] + dx * geometry.uav_step_m, pos[1] + dy * geometry.uav_step_m);
    [x, y, pos[2]]
}

/// The slot transition. Draws its randomness from `rng` and is otherwise pure.
pub fn step(state: &EnvState, action: &JointAction, cfg: &NetworkConfig, rng: &mut EnvRng) -> Result<(EnvState, StepOutcome)> {
    let draws = SlotDraws::sample(cfg.num_ues(), rng);
    step_with_draws(state, action, cfg, &draws)
}

/// [`step`] with explicit channel and task draws.
pub fn step_with_draws(
    state: &EnvState,
    action: &JointAction,
    cfg: &NetworkConfig,
    draws: &SlotDraws,
) -> Result<(EnvState, StepOutcome)> {
    let m = cfg.num_ues();
    if action.ues.len() != m || state.ue_queues.len() != m {
        return Err(Error::Contract(format!(
            "expected {m} UE actions and queues, got {} and {}",
            action.ues.len(),
            state.ue_queues.len()
        )));
    }
    let ch = &cfg.channel;
    let cp = &cfg.compute;
    let geo = &cfg.geometry;

    let uav_pos = move_uav(state.uav_pos, action.uav, geo);

    let mut energy = vec![UeEnergy::default(); m];
    let mut times = vec![UeTimes::default(); m];
    let mut rates = vec![0.0; m];
    let mut offloaded = vec![0u64; m];
    let mut ue_queues = state.ue_queues.clone();
    let mut uav_arrivals = Vec::new();
    let mut bs_arrivals = Vec::new();
    let mut processed = 0u64;

    for (i, choice) in action.ues.iter().enumerate() {
        let ue = geo.ue_pos[i];
        let rate = match choice {
            Offload::Local => 0.0,
            Offload::Bs => {
                let d = ((ue[0] - geo.bs_pos[0]).powi(2) + (ue[1] - geo.bs_pos[1]).powi(2) + (ue[2] - geo.bs_pos[2]).powi(2)).sqrt();
                achievable_rate(terrestrial_gain_with_fading(ch, d, draws.terrestrial_fading[i])?, ch)
            }
            Offload::Uav => {
                let g = air_gain_from_draws(ch, uav_pos, ue, draws.los_u[i], draws.air_fading[i])?;
                achievable_rate(g.gain, ch)
            }
        };
        rates[i] = rate;
        match choice {
            Offload::Local => {
                let out = local_process_step(ue_queues[i], cp.ue, cp.cycles_per_bit, cp.tau_s);
                ue_queues[i] = out.queue;
                energy[i].local_cp = out.energy;
                times[i].t_cp = out.t_cp;
                processed += out.processed_bits;
            }
            Offload::Uav | Offload::Bs => {
                let buffered = ue_queues[i].total();
                let bits = deliverable_bits(rate, cp.tau_s, cp.packet_bits, buffered);
                ue_queues[i].drain_front(bits);
                // Whatever stays behind becomes the carried backlog.
                ue_queues[i] = TaskQueue {
                    carried_bits: ue_queues[i].total(),
                    fresh_bits: 0,
                };
                offloaded[i] = bits;
                if bits > 0 {
                    energy[i].transmit = ch.tx_power_w * bits as f64 / rate;
                    times[i].t_trans = bits as f64 / rate;
                }
                if *choice == Offload::Uav {
                    uav_arrivals.push((i, bits));
                } else {
                    bs_arrivals.push((i, bits));
                }
            }
        }
    }

    let mut run_server = |queue: TaskQueue, arrivals: &[(usize, u64)], cpu: Processor| -> Result<TaskQueue> {
        let out = server_process_step(queue.total(), arrivals, cpu, cp.cycles_per_bit, cp.tau_s)?;
        for c in &out.charges {
            energy[c.ue].server_cp = c.energy;
            times[c.ue].t_cp = c.t_cp;
        }
        processed += out.processed_bits;
        Ok(TaskQueue {
            carried_bits: out.backlog_bits,
            fresh_bits: 0,
        })
    };
    let uav_queue = run_server(state.uav_queue, &uav_arrivals, cp.uav)?;
    let bs_queue = run_server(state.bs_queue, &bs_arrivals, cp.bs)?;

    let ue_backlog: Vec<u64> = ue_queues.iter().map(|q| q.carried_bits).collect();
    let mut produced = 0u64;
    for (i, q) in ue_queues.iter_mut().enumerate() {
        let bits = tasks::jittered_bits(&cfg.tasks[i], state.t, draws.task_u[i]);
        q.fresh_bits = bits;
        produced += bits;
    }

    let energy_total: f64 = energy.iter().map(UeEnergy::total).sum();
    let backlog_total = ue_backlog.iter().sum::<u64>() + uav_queue.carried_bits + bs_queue.carried_bits;
    let next = EnvState {
        uav_pos,
        ue_queues,
        uav_queue,
        bs_queue,
        t: state.t + 1,
    };
    let outcome = StepOutcome {
        reward: RewardVector::new(-energy_total, -(backlog_total as f64)),
        energy,
        ue_backlog,
        uav_backlog: uav_queue.carried_bits,
        bs_backlog: bs_queue.carried_bits,
        times,
        rates,
        offloaded_bits: offloaded,
        processed_bits: processed,
        produced_bits: produced,
        energy_total,
        backlog_total,
    };
    Ok((next, outcome))
}

/// Running ledger of produced and processed bits, kept independently of the
/// queues so that conservation can be audited each slot.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BitLedger {
    pub produced: u64,
    pub processed: u64,
}

impl BitLedger {
    pub fn record(&mut self, outcome: &StepOutcome) {
        self.produced += outcome.produced_bits;
        self.processed += outcome.processed_bits;
    }

    /// Bits the ledger says must still be somewhere in the system.
    pub fn outstanding(&self) -> u64 {
        self.produced - self.processed
    }

    pub fn balances(&self, state: &EnvState) -> bool {
        self.outstanding() == state.bits_in_system()
    }
}

/// Distance from `pos` to the BS projected on the ground.
pub fn horizontal_distance(a: [f64; 3], b: [f64; 3]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}
