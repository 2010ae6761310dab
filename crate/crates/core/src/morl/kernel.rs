//! Gaussian-kernel features and ALD-grown dictionaries.

use serde::{Deserialize, Serialize};

use super::quantize::QState;
use crate::{Error, Result};

/// A sample point `[s, a]`. Action encodings are padded to three components.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Feature {
    pub q: [f64; 3],
    pub d: f64,
    pub a: [f64; 3],
}

impl Feature {
    pub fn new(s: QState, a: [f64; 3]) -> Self {
        Self { q: s.q, d: s.d, a }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelScales {
    pub sigma_pos: f64,
    pub sigma_backlog: f64,
    pub sigma_action: f64,
}

impl Default for KernelScales {
    fn default() -> Self {
        Self {
            sigma_pos: 200.0,
            sigma_backlog: 1.0,
            sigma_action: 1.0,
        }
    }
}

fn sq_dist3(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)
}

impl KernelScales {
    /// Position and log-backlog factors of the kernel.
    pub fn state_part(&self, q: &[f64; 3], d: f64, f: &Feature) -> f64 {
        (-sq_dist3(q, &f.q) / (2.0 * self.sigma_pos * self.sigma_pos)).exp()
            * (-(d - f.d).powi(2) / (2.0 * self.sigma_backlog * self.sigma_backlog)).exp()
    }

    pub fn action_part(&self, a: &[f64; 3], b: &[f64; 3]) -> f64 {
        (-sq_dist3(a, b) / (2.0 * self.sigma_action * self.sigma_action)).exp()
    }
}

/// Product of the position, log-backlog and action Gaussians.
pub fn kernel_eval(x: &Feature, y: &Feature, scales: &KernelScales) -> f64 {
    scales.state_part(&x.q, x.d, y) * scales.action_part(&x.a, &y.a)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AldOutcome {
    pub delta: f64,
    pub admitted: bool,
}

/// Stored features with the inverse of their Gram matrix, grown by the
/// approximate-linear-dependence test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelDictionary {
    features: Vec<Feature>,
    /// Row-major `n x n` inverse Gram matrix.
    kinv: Vec<f64>,
    scales: KernelScales,
    mu0: f64,
}

impl KernelDictionary {
    pub fn new(scales: KernelScales, mu0: f64) -> Self {
        Self {
            features: Vec::new(),
            kinv: Vec::new(),
            scales,
            mu0,
        }
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn features(&self) -> &[Feature] {
        &self.features
    }

    pub fn scales(&self) -> &KernelScales {
        &self.scales
    }

    pub fn threshold(&self) -> f64 {
        self.mu0
    }

    pub fn inverse_gram(&self) -> &[f64] {
        &self.kinv
    }

    pub fn kernel_vector(&self, x: &Feature) -> Vec<f64> {
        self.features.iter().map(|f| kernel_eval(x, f, &self.scales)).collect()
    }

    /// Kernel vectors of state `s` paired with each action in `actions`,
    /// sharing the state factor across actions.
    pub fn kernel_vectors_for_actions(&self, s: &QState, actions: &[[f64; 3]]) -> Vec<Vec<f64>> {
        let state_parts: Vec<f64> = self.features.iter().map(|f| self.scales.state_part(&s.q, s.d, f)).collect();
        actions
            .iter()
            .map(|a| {
                self.features
                    .iter()
                    .zip(&state_parts)
                    .map(|(f, sp)| sp * self.scales.action_part(a, &f.a))
                    .collect()
            })
            .collect()
    }

    pub fn gram(&self) -> Vec<f64> {
        let n = self.len();
        let mut g = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                g[i * n + j] = kernel_eval(&self.features[i], &self.features[j], &self.scales);
            }
        }
        g
    }

    /// `max |K^-1 K - I|` over all entries.
    pub fn inverse_residual(&self) -> f64 {
        let n = self.len();
        let g = self.gram();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let v: f64 = (0..n).map(|k| self.kinv[i * n + k] * g[k * n + j]).sum();
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((v - target).abs());
            }
        }
        worst
    }

    pub fn check_consistency(&self) -> Result<()> {
        let r = self.inverse_residual();
        if r > 1e-6 {
            return Err(Error::InternalState(format!("inverse Gram residual {r:.3e} exceeds 1e-6")));
        }
        Ok(())
    }

    fn projection(&self, k: &[f64]) -> Vec<f64> {
        let n = self.len();
        (0..n).map(|i| (0..n).map(|j| self.kinv[i * n + j] * k[j]).sum()).collect()
    }

    /// Squared residual of projecting `phi(x)` onto the span of the stored
    /// features: `k(x,x) - k_x^T K^-1 k_x`, clamped at zero.
    pub fn ald_delta(&self, x: &Feature) -> f64 {
        let k = self.kernel_vector(x);
        let a = self.projection(&k);
        let raw = kernel_eval(x, x, &self.scales) - dot(&k, &a);
        raw.max(0.0)
    }

    /// Admits `x` when its ALD residual exceeds the threshold, growing the
    /// inverse Gram matrix by a block (Schur complement) update.
    pub fn ald_test(&mut self, x: &Feature) -> Result<AldOutcome> {
        let n = self.len();
        if self.kinv.len() != n * n {
            return Err(Error::InternalState("inverse Gram cache has the wrong shape".into()));
        }
        let k = self.kernel_vector(x);
        let a = self.projection(&k);
        let raw = kernel_eval(x, x, &self.scales) - dot(&k, &a);
        if raw < -1e-6 {
            return Err(Error::InternalState(format!("negative ALD residual {raw:.3e}: inverse Gram is stale")));
        }
        let delta = raw.max(0.0);
        if delta <= self.mu0 {
            return Ok(AldOutcome { delta, admitted: false });
        }
        let m = n + 1;
        let mut next = vec![0.0; m * m];
        for i in 0..n {
            for j in 0..n {
                next[i * m + j] = self.kinv[i * n + j] + a[i] * a[j] / delta;
            }
            next[i * m + n] = -a[i] / delta;
            next[n * m + i] = -a[i] / delta;
        }
        next[n * m + n] = 1.0 / delta;
        self.kinv = next;
        self.features.push(*x);
        Ok(AldOutcome { delta, admitted: true })
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
