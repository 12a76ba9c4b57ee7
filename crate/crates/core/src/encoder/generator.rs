use crate::error::{Error, Result};
use crate::stats::nearest_rank_percentile;

use super::{EncodedStream, SpikeTrain};

/// Non-leaky integrate-and-fire accumulators, one per input position, that
/// emit +1 / −1 spikes and soft-reset by the crossed threshold.
#[derive(Debug, Clone)]
pub struct SpikeGeneratorState {
    pub membrane: Vec<f64>,
    theta_neg: f64,
    theta_pos: f64,
}

impl SpikeGeneratorState {
    #[allow(clippy::neg_cmp_op_on_partial_ord)] // rejects NaN as well
    pub fn new(positions: usize, theta_neg: f64, theta_pos: f64) -> Result<Self> {
        if !(theta_neg < theta_pos) || !theta_neg.is_finite() || !theta_pos.is_finite() {
            return Err(Error::config(format!(
                "generator thresholds need θ⁻ < θ⁺, got ({theta_neg}, {theta_pos})"
            )));
        }
        Ok(SpikeGeneratorState {
            membrane: vec![0.0; positions],
            theta_neg,
            theta_pos,
        })
    }

    pub fn thresholds(&self) -> (f64, f64) {
        (self.theta_neg, self.theta_pos)
    }

    /// Integrates one timestep of input and writes at most one spike per
    /// position into `out`.
    pub fn step(&mut self, input: &[f64], out: &mut [i8]) {
        debug_assert_eq!(input.len(), self.membrane.len());
        for ((m, &x), o) in self.membrane.iter_mut().zip(input).zip(out.iter_mut()) {
            *m += x;
            *o = if *m >= self.theta_pos {
                *m -= self.theta_pos;
                1
            } else if *m <= self.theta_neg {
                *m -= self.theta_neg;
                -1
            } else {
                0
            };
        }
    }

    pub fn reset(&mut self) {
        self.membrane.iter_mut().for_each(|m| *m = 0.0);
    }
}

/// Runs `state` over every timestep of `stream`. The membrane is carried
/// across cycles; the final residual map is returned alongside the spikes.
pub fn spike_generate(
    stream: &EncodedStream,
    state: &mut SpikeGeneratorState,
) -> Result<(SpikeTrain, Vec<f64>)> {
    if state.membrane.len() != stream.positions() {
        return Err(Error::invalid(format!(
            "generator has {} positions, stream has {}",
            state.membrane.len(),
            stream.positions()
        )));
    }
    let mut train = SpikeTrain::zeros(stream.timesteps(), stream.shape);
    for t in 0..stream.timesteps() {
        let input = stream.contribution(t)?;
        state.step(input, train.step_mut(t));
    }
    Ok((train, state.membrane.clone()))
}

/// Percentile thresholds `(θ⁻, θ⁺)` of the running, spike-free accumulation
/// pooled over every position and timestep of the calibration streams.
///
/// Positions whose accumulation is exactly zero (blocks with no signal) are
/// left out of the pool; they never cross any threshold and would otherwise
/// collapse both percentiles onto zero for sparse images.
pub fn calibrate_generator_thresholds(
    streams: &[EncodedStream],
    percentiles: (f64, f64),
) -> Result<(f64, f64)> {
    if streams.is_empty() {
        return Err(Error::invalid(
            "generator calibration needs at least one stream",
        ));
    }
    let mut pool: Vec<f32> = Vec::new();
    for s in streams {
        let mut acc = vec![0.0f64; s.positions()];
        for t in 0..s.timesteps() {
            for (a, x) in acc.iter_mut().zip(s.contribution(t)?) {
                *a += x;
            }
            pool.extend(acc.iter().filter(|&&a| a != 0.0).map(|&a| a as f32));
        }
    }
    if pool.is_empty() {
        return Err(Error::invalid("calibration streams carry no signal"));
    }
    let lo = nearest_rank_percentile(&mut pool, percentiles.0)? as f64;
    let hi = nearest_rank_percentile(&mut pool, percentiles.1)? as f64;
    Ok((lo, hi))
}
