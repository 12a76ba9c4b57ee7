use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::substream;

use super::SpikeTrain;

/// Rate coding baseline: an independent Bernoulli(p = intensity) draw per
/// position per timestep. Intensities must lie in `[0, 1]`.
pub fn poisson_encode(
    intensities: &[f64],
    shape: (usize, usize, usize),
    timesteps: usize,
    seed: u64,
    stream_index: u64,
) -> Result<SpikeTrain> {
    if intensities.len() != shape.0 * shape.1 * shape.2 {
        return Err(Error::invalid("intensity map does not match its shape"));
    }
    if let Some(v) = intensities.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::invalid(format!("intensity {v} outside [0, 1]")));
    }
    let mut rng = substream(seed, "poisson", stream_index);
    let mut train = SpikeTrain::zeros(timesteps, shape);
    for t in 0..timesteps {
        for (o, &p) in train.step_mut(t).iter_mut().zip(intensities) {
            let u: f64 = rng.random();
            *o = i8::from(u < p);
        }
    }
    Ok(train)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn extremes() {
        let s = poisson_encode(&[0.0, 1.0], (1, 1, 2), 50, 1, 0).unwrap();
        for t in 0..50 {
            assert_eq!(s.step(t), &[0, 1]);
        }
    }

    #[test]
    fn mean_rate_converges() {
        let s = poisson_encode(&[0.3], (1, 1, 1), 10_000, 5, 0).unwrap();
        let rate = s.counts().0 as f64 / 10_000.0;
        assert!((rate - 0.3).abs() < 0.02, "{rate}");
    }

    #[test]
    fn deterministic_per_seed() {
        let a = poisson_encode(&[0.5; 8], (1, 2, 4), 20, 9, 3).unwrap();
        let b = poisson_encode(&[0.5; 8], (1, 2, 4), 20, 9, 3).unwrap();
        let c = poisson_encode(&[0.5; 8], (1, 2, 4), 20, 9, 4).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn out_of_range() {
        assert!(poisson_encode(&[1.2], (1, 1, 1), 1, 0, 0).is_err());
        assert!(poisson_encode(&[-0.1], (1, 1, 1), 1, 0, 0).is_err());
    }
}
