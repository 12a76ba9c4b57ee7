use crate::error::{Error, Result};

/// Which ranked basis is presented at each timestep.
///
/// Entries of `steps` are basis ranks (0 is the zero-frequency basis). The
/// regular schedule cycles through the first `curtail` ranks:
/// `steps[t] = t mod curtail`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrequencySchedule {
    block_size: usize,
    curtail: usize,
    steps: Vec<usize>,
}

impl FrequencySchedule {
    /// `total_timesteps` steps cycling over the first `curtail` bases. A
    /// trailing partial cycle is cut off at `total_timesteps`.
    pub fn cyclic(block_size: usize, curtail: usize, total_timesteps: usize) -> Result<Self> {
        let d = block_size * block_size;
        if block_size == 0 {
            return Err(Error::invalid("block size must be at least 1"));
        }
        if curtail == 0 || curtail > d {
            return Err(Error::invalid(format!(
                "curtail {curtail} outside [1, {d}]"
            )));
        }
        if total_timesteps == 0 {
            return Err(Error::invalid("schedule needs at least one timestep"));
        }
        Ok(FrequencySchedule {
            block_size,
            curtail,
            steps: (0..total_timesteps).map(|t| t % curtail).collect(),
        })
    }

    /// `cycles` complete passes over all `n²` bases.
    pub fn full_cycles(block_size: usize, cycles: usize) -> Result<Self> {
        let d = block_size * block_size;
        Self::cyclic(block_size, d, cycles * d)
    }

    /// One complete cycle followed by a second cycle truncated after the
    /// `k` leading bases.
    pub fn truncated_second_cycle(block_size: usize, k: usize) -> Result<Self> {
        let d = block_size * block_size;
        if block_size == 0 || k == 0 || k > d {
            return Err(Error::invalid(format!(
                "second-cycle length {k} outside [1, {d}]"
            )));
        }
        let steps = (0..d).chain(0..k).collect();
        Ok(FrequencySchedule {
            block_size,
            curtail: d,
            steps,
        })
    }

    pub fn block_size(&self) -> usize {
        self.block_size
    }

    pub fn curtail(&self) -> usize {
        self.curtail
    }

    pub fn total_timesteps(&self) -> usize {
        self.steps.len()
    }

    /// Number of (possibly partial) passes over the curtailed basis set.
    pub fn cycles(&self) -> usize {
        self.steps.len().div_ceil(self.curtail)
    }

    pub fn steps(&self) -> &[usize] {
        &self.steps
    }

    /// Basis rank presented at timestep `t`.
    pub fn index_at(&self, t: usize) -> Result<usize> {
        self.steps.get(t).copied().ok_or_else(|| {
            Error::invalid(format!(
                "timestep {t} outside schedule of {} steps",
                self.steps.len()
            ))
        })
    }

    /// Distinct bases used at least once.
    pub fn distinct_bases(&self) -> usize {
        let mut seen = vec![false; self.block_size * self.block_size];
        for &s in &self.steps {
            seen[s] = true;
        }
        seen.iter().filter(|&&b| b).count()
    }
}
