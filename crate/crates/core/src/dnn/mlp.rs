//! Fully connected network with tanh hidden layers and a linear head.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub n_in: usize,
    pub n_out: usize,
    /// Row-major `n_out x n_in`.
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

impl Dense {
    fn zeros(n_in: usize, n_out: usize) -> Self {
        Self {
            n_in,
            n_out,
            w: vec![0.0; n_in * n_out],
            b: vec![0.0; n_out],
        }
    }

    fn affine(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(self.b.iter().enumerate().map(|(o, b)| {
            let row = &self.w[o * self.n_in..(o + 1) * self.n_in];
            b + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
        }));
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub layers: Vec<Dense>,
}

/// Per-layer `(dW, db)`, shaped like the network.
#[derive(Debug, Clone, PartialEq)]
pub struct Grads {
    pub layers: Vec<(Vec<f64>, Vec<f64>)>,
}

impl Grads {
    pub fn zeros_like(net: &Mlp) -> Self {
        Self {
            layers: net.layers.iter().map(|l| (vec![0.0; l.w.len()], vec![0.0; l.b.len()])).collect(),
        }
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.layers.iter().flat_map(|(w, b)| w.iter().chain(b.iter()).copied()).collect()
    }
}

impl Mlp {
    /// All-zero network with layer widths `sizes` (input first, output last).
    pub fn zeros(sizes: &[usize]) -> Self {
        Self {
            layers: sizes.windows(2).map(|w| Dense::zeros(w[0], w[1])).collect(),
        }
    }

    /// Glorot-uniform weights in `±sqrt(6/(fan_in+fan_out))`, zero biases.
    pub fn glorot<R: Rng + ?Sized>(sizes: &[usize], rng: &mut R) -> Self {
        let mut net = Self::zeros(sizes);
        for l in &mut net.layers {
            let limit = (6.0 / (l.n_in + l.n_out) as f64).sqrt();
            for w in &mut l.w {
                *w = rng.random_range(-limit..limit);
            }
        }
        net
    }

    pub fn input_dim(&self) -> usize {
        self.layers.first().map_or(0, |l| l.n_in)
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.n_out)
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    pub fn params_flat(&self) -> Vec<f64> {
        self.layers.iter().flat_map(|l| l.w.iter().chain(l.b.iter()).copied()).collect()
    }

    pub fn set_params_flat(&mut self, p: &[f64]) {
        let mut it = p.iter().copied();
        for l in &mut self.layers {
            for w in l.w.iter_mut().chain(l.b.iter_mut()) {
                *w = it.next().expect("parameter vector too short");
            }
        }
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::Contract(format!("network expects {} inputs, got {}", self.input_dim(), x.len())));
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let mut a = x.to_vec();
        let mut z = Vec::new();
        let last = self.layers.len() - 1;
        for (i, l) in self.layers.iter().enumerate() {
            l.affine(&a, &mut z);
            if i < last {
                z.iter_mut().for_each(|v| *v = v.tanh());
            }
            std::mem::swap(&mut a, &mut z);
        }
        Ok(a)
    }

    /// Forward pass keeping every layer's activation (input first).
    fn forward_cached(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.to_vec());
        let last = self.layers.len() - 1;
        for (i, l) in self.layers.iter().enumerate() {
            let mut z = Vec::with_capacity(l.n_out);
            l.affine(&acts[i], &mut z);
            if i < last {
                z.iter_mut().for_each(|v| *v = v.tanh());
            }
            acts.push(z);
        }
        acts
    }

    /// Adds `d(grad_out · y)/d(params)` for input `x` into `grads` and
    /// returns the network output.
    pub fn backprop(&self, x: &[f64], grad_out: impl FnOnce(&[f64]) -> Vec<f64>, grads: &mut Grads) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let acts = self.forward_cached(x);
        let output = acts.last().cloned().unwrap_or_default();
        let mut delta = grad_out(&output);
        for (i, l) in self.layers.iter().enumerate().rev() {
            let input = &acts[i];
            let (gw, gb) = &mut grads.layers[i];
            for o in 0..l.n_out {
                let d = delta[o];
                if d == 0.0 {
                    continue;
                }
                gb[o] += d;
                let row = &mut gw[o * l.n_in..(o + 1) * l.n_in];
                for (g, v) in row.iter_mut().zip(input) {
                    *g += d * v;
                }
            }
            if i > 0 {
                // input = tanh(z) of the previous layer.
                let mut prev = vec![0.0; l.n_in];
                for o in 0..l.n_out {
                    let d = delta[o];
                    if d == 0.0 {
                        continue;
                    }
                    let row = &l.w[o * l.n_in..(o + 1) * l.n_in];
                    for (p, w) in prev.iter_mut().zip(row) {
                        *p += w * d;
                    }
                }
                for (p, a) in prev.iter_mut().zip(input) {
                    *p *= 1.0 - a * a;
                }
                delta = prev;
            }
        }
        Ok(output)
    }
}

/// Mean squared error `(1/N) sum (y_k - Q(x_k)[a_k])^2` and its gradient.
pub fn td_loss_and_grad(net: &Mlp, inputs: &[Vec<f64>], actions: &[usize], targets: &[f64]) -> Result<(f64, Grads)> {
    let n = inputs.len();
    if n == 0 || actions.len() != n || targets.len() != n {
        return Err(Error::Contract("minibatch inputs, actions and targets must be non-empty and aligned".into()));
    }
    let mut grads = Grads::zeros_like(net);
    let mut loss = 0.0;
    let scale = 1.0 / n as f64;
    for ((x, &a), &y) in inputs.iter().zip(actions).zip(targets) {
        if a >= net.output_dim() {
            return Err(Error::Contract(format!("action {a} exceeds network outputs")));
        }
        net.backprop(
            x,
            |out| {
                let err = y - out[a];
                loss += err * err * scale;
                let mut g = vec![0.0; out.len()];
                g[a] = -2.0 * err * scale;
                g
            },
            &mut grads,
        )?;
    }
    Ok((loss, grads))
}
