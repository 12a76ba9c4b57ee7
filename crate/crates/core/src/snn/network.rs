//! Weight storage shared by the ANN and its converted SNN.

use rand::Rng;

use super::arch::Architecture;
use crate::rng::substream;

/// Bias-free weights, one flat vector per layer (empty for unweighted layers).
/// Conv weights are `c_out × c_in × k × k`; linear weights are `n_out × n_in`.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub arch: Architecture,
    pub weights: Vec<Vec<f32>>,
}

impl Network {
    pub fn zeros(arch: Architecture) -> Self {
        let weights = (0..arch.layers().len())
            .map(|i| vec![0.0; arch.weight_count(i)])
            .collect();
        Network { arch, weights }
    }

    /// Xavier-uniform initialisation: `U(-a, a)` with `a = √(6 / (fan_in + fan_out))`.
    pub fn xavier(arch: Architecture, seed: u64) -> Self {
        let mut net = Self::zeros(arch);
        for i in net.arch.weighted_layers() {
            let (fi, fo) = net.arch.fans(i);
            let a = (6.0 / (fi + fo) as f64).sqrt();
            let mut rng = substream(seed, "init", i as u64);
            for w in &mut net.weights[i] {
                *w = rng.random_range(-a..a) as f32;
            }
        }
        net
    }

    pub fn parameter_count(&self) -> usize {
        self.weights.iter().map(Vec::len).sum()
    }
}
