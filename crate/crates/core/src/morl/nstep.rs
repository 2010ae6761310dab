//! Reward window and n-step return.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::env::RewardVector;
use crate::{Error, Result};

/// Holds the `n` most recent reward vectors, oldest first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardBuffer {
    cap: usize,
    items: VecDeque<RewardVector>,
}

impl RewardBuffer {
    pub fn new(n: usize) -> Self {
        Self {
            cap: n.max(1),
            items: VecDeque::with_capacity(n.max(1)),
        }
    }

    pub fn push(&mut self, r: RewardVector) {
        if self.items.len() == self.cap {
            self.items.pop_front();
        }
        self.items.push_back(r);
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &RewardVector> {
        self.items.iter()
    }
}

/// Which end of the window gets weight `gamma^0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowOrder {
    /// `sum_{i=rho+1}^{min(rho+n,T)} gamma^(i-rho-1) r_i`: the oldest reward is undiscounted.
    #[default]
    OldestFirst,
    /// Ablation: the newest reward is undiscounted.
    NewestFirst,
}

/// n-step return for slot `t` (whose reward is `r_{t+1}`, the newest in
/// `buffer`) with horizon `horizon`.
///
/// Returns `Ok(None)` while `rho = t - n + 1` is negative.
pub fn n_step_return(
    buffer: &RewardBuffer,
    gamma: f64,
    n: usize,
    t: u64,
    horizon: u64,
    order: WindowOrder,
) -> Result<Option<RewardVector>> {
    let n = n as u64;
    if t + 1 < n {
        return Ok(None);
    }
    if (buffer.len() as u64) < n {
        return Err(Error::Contract(format!(
            "n-step window needs {n} rewards at slot {t}, buffer holds {}",
            buffer.len()
        )));
    }
    let rho = t + 1 - n;
    let upper = (rho + n).min(horizon.max(rho + 1));
    let count = (upper - rho) as usize;
    // The buffer's newest entry is r_{t+1} = r_{rho+n}; r_{rho+1} sits at the front.
    let window: Vec<RewardVector> = buffer.iter().take(count).copied().collect();
    let mut acc: Option<RewardVector> = None;
    for (k, r) in window.iter().enumerate() {
        let exponent = match order {
            WindowOrder::OldestFirst => k,
            WindowOrder::NewestFirst => count - 1 - k,
        };
        let term = r.scaled(gamma.powi(exponent as i32));
        acc = Some(match acc {
            None => term,
            Some(a) => a.add(term),
        });
    }
    Ok(acc)
}
