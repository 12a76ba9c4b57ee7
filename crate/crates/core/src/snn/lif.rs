//! Leaky integrate-and-fire dynamics with soft reset.
//!
//! `u[t] = λ·u[t-1] + I[t] - v_th·o[t-1]`, `o[t] = 1` iff `u[t] > v_th`.
//! The reset is applied one step late, through the previous spike.

use num_traits::Float;

use crate::error::{Error, Result};

/// Advances one step in place. `spikes` holds `o[t-1]` on entry and `o[t]`
/// on exit. Returns the number of spikes emitted.
pub fn lif_step<T: Float>(
    membrane: &mut [T],
    spikes: &mut [T],
    current: &[T],
    v_th: T,
    leak: T,
) -> Result<usize> {
    debug_assert_eq!(membrane.len(), current.len());
    let mut fired = 0usize;
    let mut bad = false;
    for ((u, o), &i) in membrane.iter_mut().zip(spikes.iter_mut()).zip(current) {
        let next = leak * *u + i - v_th * *o;
        bad |= next.is_nan();
        *u = next;
        if next > v_th {
            *o = T::one();
            fired += 1;
        } else {
            *o = T::zero();
        }
    }
    if bad {
        return Err(Error::NumericFault(
            "NaN membrane potential in LIF layer".into(),
        ));
    }
    Ok(fired)
}

/// Membrane and last-spike state of one layer.
#[derive(Debug, Clone)]
pub struct LifState<T> {
    pub membrane: Vec<T>,
    pub spikes: Vec<T>,
    pub v_th: T,
    pub leak: T,
}

impl<T: Float> LifState<T> {
    pub fn new(neurons: usize, v_th: T, leak: T) -> Self {
        LifState {
            membrane: vec![T::zero(); neurons],
            spikes: vec![T::zero(); neurons],
            v_th,
            leak,
        }
    }

    /// Integrates `current` and returns this step's spikes.
    pub fn step(&mut self, current: &[T]) -> Result<&[T]> {
        lif_step(
            &mut self.membrane,
            &mut self.spikes,
            current,
            self.v_th,
            self.leak,
        )?;
        Ok(&self.spikes)
    }

    pub fn reset(&mut self) {
        self.membrane.iter_mut().for_each(|u| *u = T::zero());
        self.spikes.iter_mut().for_each(|o| *o = T::zero());
    }
}
