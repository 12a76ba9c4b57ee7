//! Temporal input encoding: frequency schedules, per-timestep basis
//! contributions, the signed integrate-and-fire spike generator, and the
//! Poisson rate-coding baseline.

mod generator;
mod pipeline;
mod poisson;
mod schedule;
mod spikes;
mod stream;

pub use generator::{calibrate_generator_thresholds, spike_generate, SpikeGeneratorState};
pub use pipeline::{block_samples, normalized_planes, EncoderKind, InputEncoder, Normalization};
pub use poisson::poisson_encode;
pub use schedule::FrequencySchedule;
pub use spikes::SpikeTrain;
pub use stream::{timestep_contribution, EncodedStream};

/// Default percentiles for the generator's negative and positive thresholds.
pub const GENERATOR_PERCENTILES: (f64, f64) = (6.5, 93.5);

/// JPEG zigzag traversal of an `n × n` grid as `(row, col)` pairs, from
/// `(0, 0)` to `(n − 1, n − 1)`.
pub fn zigzag_order(n: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(n * n);
    if n == 0 {
        return out;
    }
    for s in 0..(2 * n - 1) {
        let lo = s.saturating_sub(n - 1);
        let hi = s.min(n - 1);
        if s % 2 == 0 {
            for r in (lo..=hi).rev() {
                out.push((r, s - r));
            }
        } else {
            for r in lo..=hi {
                out.push((r, s - r));
            }
        }
    }
    out
}
