//! Online state quantization shared by every agent.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

/// A (quantized) observation: UAV position and log-backlog `d' = -ln(max(D, 1))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QState {
    pub q: [f64; 3],
    pub d: f64,
}

impl QState {
    pub fn new(q: [f64; 3], d: f64) -> Self {
        Self { q, d }
    }

    /// Builds the observation from a UAV position and the previous slot's backlog in bits.
    pub fn observe(uav_pos: [f64; 3], backlog_bits: u64) -> Self {
        Self {
            q: uav_pos,
            d: log_backlog(backlog_bits),
        }
    }

    pub fn position_distance(&self, other: &QState) -> f64 {
        let dx = self.q[0] - other.q[0];
        let dy = self.q[1] - other.q[1];
        let dz = self.q[2] - other.q[2];
        (dx * dx + dy * dy + dz * dz).sqrt()
    }
}

pub fn log_backlog(bits: u64) -> f64 {
    -(bits.max(1) as f64).ln()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(from = "StoredSet", into = "StoredSet")]
pub struct QuantizedStateSet {
    states: Vec<QState>,
    mu_q: f64,
    mu_d: f64,
    cell: f64,
    grid: HashMap<(i64, i64), Vec<usize>>,
}

#[derive(Serialize, Deserialize)]
struct StoredSet {
    states: Vec<QState>,
    mu_q: f64,
    mu_d: f64,
}

impl From<StoredSet> for QuantizedStateSet {
    fn from(s: StoredSet) -> Self {
        let mut set = QuantizedStateSet::new(s.mu_q, s.mu_d);
        for st in s.states {
            set.push(st);
        }
        set
    }
}

impl From<QuantizedStateSet> for StoredSet {
    fn from(s: QuantizedStateSet) -> Self {
        StoredSet {
            states: s.states,
            mu_q: s.mu_q,
            mu_d: s.mu_d,
        }
    }
}

impl PartialEq for QuantizedStateSet {
    fn eq(&self, other: &Self) -> bool {
        self.states == other.states && self.mu_q == other.mu_q && self.mu_d == other.mu_d
    }
}

impl QuantizedStateSet {
    pub fn new(mu_q: f64, mu_d: f64) -> Self {
        Self {
            states: Vec::new(),
            mu_q,
            mu_d,
            cell: mu_q.max(1e-9),
            grid: HashMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn get(&self, index: usize) -> QState {
        self.states[index]
    }

    pub fn states(&self) -> &[QState] {
        &self.states
    }

    pub fn thresholds(&self) -> (f64, f64) {
        (self.mu_q, self.mu_d)
    }

    fn cell_of(&self, q: [f64; 3]) -> (i64, i64) {
        ((q[0] / self.cell).floor() as i64, (q[1] / self.cell).floor() as i64)
    }

    fn push(&mut self, s: QState) -> usize {
        let idx = self.states.len();
        self.states.push(s);
        let cell = self.cell_of(s.q);
        self.grid.entry(cell).or_default().push(idx);
        idx
    }

    /// The stored state `s` maps to, if any: among stored states within both
    /// thresholds, the one closest in position, then in `d'`, then lowest index.
    pub fn lookup(&self, s: &QState) -> Option<usize> {
        let (cx, cy) = self.cell_of(s.q);
        let mut best: Option<(f64, f64, usize)> = None;
        for gx in cx - 1..=cx + 1 {
            for gy in cy - 1..=cy + 1 {
                let Some(bucket) = self.grid.get(&(gx, gy)) else { continue };
                for &i in bucket {
                    let st = &self.states[i];
                    let dq = s.position_distance(st);
                    let dd = (s.d - st.d).abs();
                    if dq > self.mu_q || dd > self.mu_d {
                        continue;
                    }
                    let key = (dq, dd, i);
                    if best.is_none_or(|b| key < b) {
                        best = Some(key);
                    }
                }
            }
        }
        best.map(|b| b.2)
    }

    /// Maps `s` to a stored state, appending it when it is farther than
    /// `mu_q` in position or `mu_d` in `d'` from every stored state.
    pub fn quantize(&mut self, s: QState) -> (usize, bool) {
        match self.lookup(&s) {
            Some(i) => (i, false),
            None => (self.push(s), true),
        }
    }
}
