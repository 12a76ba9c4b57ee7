use std::str::FromStr;

use crate::error::{config, invalid, Error, Result};
use crate::snn::OptimizerState;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

impl OptimizerKind {
    pub fn name(self) -> &'static str {
        match self {
            OptimizerKind::Sgd => "sgd",
            OptimizerKind::Adam => "adam",
        }
    }
}

impl FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sgd" => Ok(OptimizerKind::Sgd),
            "adam" => Ok(OptimizerKind::Adam),
            other => Err(config(format!("unknown optimizer `{other}` (sgd, adam)"))),
        }
    }
}

/// SGD with momentum (`v ← m·v + g; w ← w − η·(v + wd·w)`) or Adam with bias
/// correction and L2 weight decay folded into the gradient.
#[derive(Debug, Clone)]
pub struct Optimizer {
    pub kind: OptimizerKind,
    pub lr: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    first: Vec<Vec<f32>>,
    second: Vec<Vec<f32>>,
}

impl Optimizer {
    pub fn sgd(lr: f64, momentum: f64, weight_decay: f64) -> Self {
        Self::build(OptimizerKind::Sgd, lr, momentum, weight_decay)
    }

    pub fn adam(lr: f64, weight_decay: f64) -> Self {
        Self::build(OptimizerKind::Adam, lr, 0.0, weight_decay)
    }

    pub fn new(kind: OptimizerKind, lr: f64, momentum: f64, weight_decay: f64) -> Self {
        Self::build(kind, lr, momentum, weight_decay)
    }

    fn build(kind: OptimizerKind, lr: f64, momentum: f64, weight_decay: f64) -> Self {
        Optimizer {
            kind,
            lr,
            momentum,
            weight_decay,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            first: Vec::new(),
            second: Vec::new(),
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    fn ensure_state(&mut self, weights: &[Vec<f32>]) {
        if self.first.len() != weights.len() {
            self.first = weights.iter().map(|w| vec![0.0; w.len()]).collect();
            if self.kind == OptimizerKind::Adam {
                self.second = self.first.clone();
            }
        }
    }

    pub fn step(&mut self, weights: &mut [Vec<f32>], grads: &[Vec<f32>]) -> Result<()> {
        if weights.len() != grads.len()
            || weights.iter().zip(grads).any(|(w, g)| w.len() != g.len())
        {
            return Err(invalid("gradient layout differs from weights"));
        }
        self.ensure_state(weights);
        self.step += 1;
        let lr = self.lr as f32;
        let wd = self.weight_decay as f32;
        match self.kind {
            OptimizerKind::Sgd => {
                let m = self.momentum as f32;
                for ((w, g), v) in weights.iter_mut().zip(grads).zip(&mut self.first) {
                    for ((wi, gi), vi) in w.iter_mut().zip(g).zip(v.iter_mut()) {
                        *vi = m * *vi + gi;
                        *wi -= lr * (*vi + wd * *wi);
                    }
                }
            }
            OptimizerKind::Adam => {
                let (b1, b2) = (self.beta1 as f32, self.beta2 as f32);
                let c1 = 1.0 - self.beta1.powi(self.step as i32);
                let c2 = 1.0 - self.beta2.powi(self.step as i32);
                let (c1, c2, eps) = (c1 as f32, c2 as f32, self.eps as f32);
                for (((w, g), m), v) in weights
                    .iter_mut()
                    .zip(grads)
                    .zip(&mut self.first)
                    .zip(&mut self.second)
                {
                    for (((wi, gi), mi), vi) in
                        w.iter_mut().zip(g).zip(m.iter_mut()).zip(v.iter_mut())
                    {
                        let g = gi + wd * *wi;
                        *mi = b1 * *mi + (1.0 - b1) * g;
                        *vi = b2 * *vi + (1.0 - b2) * g * g;
                        let mhat = *mi / c1;
                        let vhat = *vi / c2;
                        *wi -= lr * mhat / (vhat.sqrt() + eps);
                    }
                }
            }
        }
        Ok(())
    }

    pub fn export(&self) -> OptimizerState {
        let flat = |bufs: &[Vec<f32>]| bufs.iter().flatten().copied().collect::<Vec<f32>>();
        let mut buffers = Vec::new();
        if !self.first.is_empty() {
            buffers.push(flat(&self.first));
            if self.kind == OptimizerKind::Adam {
                buffers.push(flat(&self.second));
            }
        }
        OptimizerState {
            name: self.kind.name().into(),
            step: self.step,
            buffers,
        }
    }

    /// Restores moment buffers saved by [`Optimizer::export`] for weights laid
    /// out like `weights`.
    pub fn import(&mut self, state: &OptimizerState, weights: &[Vec<f32>]) -> Result<()> {
        if state.name != self.kind.name() {
            return Err(config(format!(
                "checkpoint optimizer `{}` differs from `{}`",
                state.name,
                self.kind.name()
            )));
        }
        let expected = match (self.kind, state.buffers.is_empty()) {
            (_, true) => 0,
            (OptimizerKind::Sgd, false) => 1,
            (OptimizerKind::Adam, false) => 2,
        };
        let total: usize = weights.iter().map(Vec::len).sum();
        if state.buffers.len() != expected || state.buffers.iter().any(|b| b.len() != total) {
            return Err(config("optimizer state does not match the network"));
        }
        let split = |flat: &[f32]| {
            let mut off = 0;
            weights
                .iter()
                .map(|w| {
                    let v = flat[off..off + w.len()].to_vec();
                    off += w.len();
                    v
                })
                .collect::<Vec<_>>()
        };
        self.step = state.step;
        self.first = state.buffers.first().map(|b| split(b)).unwrap_or_default();
        self.second = state.buffers.get(1).map(|b| split(b)).unwrap_or_default();
        Ok(())
    }
}

/// Step decay: `lr · factor^(epoch / every)`.
pub fn step_decay(lr: f64, factor: f64, every: usize, epoch: usize) -> f64 {
    match epoch.checked_div(every) {
        Some(steps) => lr * factor.powi(steps as i32),
        None => lr,
    }
}
