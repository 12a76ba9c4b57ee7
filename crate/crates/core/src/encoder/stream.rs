use crate::error::{Error, Result};
use crate::transforms::{BlockBasis, CoefficientGrid};

use super::FrequencySchedule;

/// Contribution of basis rank `rank` for every channel, tiled into the
/// `(n·rows) × (n·cols)` block layout, channels concatenated.
fn rank_map(grids: &[CoefficientGrid], basis: &BlockBasis, rank: usize) -> Vec<f64> {
    let n = basis.block_size;
    let (coef_idx, img) = &basis.entries[rank];
    let mut out = Vec::new();
    for g in grids {
        let (h, w) = (g.rows * n, g.cols * n);
        let mut map = vec![0.0; h * w];
        for br in 0..g.rows {
            for bc in 0..g.cols {
                let c = g.block(br, bc)[*coef_idx];
                if c == 0.0 {
                    continue;
                }
                for y in 0..n {
                    let row = &mut map[(br * n + y) * w + bc * n..][..n];
                    for (x, v) in row.iter_mut().enumerate() {
                        *v = c * img[y * n + x];
                    }
                }
            }
        }
        out.extend(map);
    }
    out
}

/// Hadamard contribution (coefficient × basis image) at timestep `t`, tiled
/// over the block grid of each channel.
pub fn timestep_contribution(
    grids: &[CoefficientGrid],
    basis: &BlockBasis,
    schedule: &FrequencySchedule,
    t: usize,
) -> Result<Vec<f64>> {
    let rank = schedule.index_at(t)?;
    if rank >= basis.len() {
        return Err(Error::invalid(format!(
            "schedule rank {rank} exceeds {} bases",
            basis.len()
        )));
    }
    Ok(rank_map(grids, basis, rank))
}

/// Per-timestep analog input of one image. Contributions depend only on the
/// basis rank, so one map per rank is kept and indexed through the schedule.
#[derive(Debug, Clone)]
pub struct EncodedStream {
    /// `(channels, height, width)` of every contribution map.
    pub shape: (usize, usize, usize),
    /// Map read at each timestep.
    steps: Vec<usize>,
    maps: Vec<Vec<f64>>,
}

impl EncodedStream {
    pub fn new(
        grids: &[CoefficientGrid],
        basis: &BlockBasis,
        schedule: &FrequencySchedule,
    ) -> Result<Self> {
        let first = grids
            .first()
            .ok_or_else(|| Error::invalid("stream needs at least one channel"))?;
        if schedule.block_size() != basis.block_size || first.block_size != basis.block_size {
            return Err(Error::invalid(
                "schedule, basis and grid block sizes differ",
            ));
        }
        let n = basis.block_size;
        let shape = (grids.len(), first.rows * n, first.cols * n);
        let maps = (0..basis.len())
            .map(|r| rank_map(grids, basis, r))
            .collect();
        Ok(EncodedStream {
            shape,
            steps: schedule.steps().to_vec(),
            maps,
        })
    }

    /// A stream whose timestep `t` carries `maps[t]`.
    pub fn from_maps(shape: (usize, usize, usize), maps: Vec<Vec<f64>>) -> Result<Self> {
        let len = shape.0 * shape.1 * shape.2;
        if maps.is_empty() || maps.iter().any(|m| m.len() != len) {
            return Err(Error::invalid(
                "stream maps must be non-empty and match the shape",
            ));
        }
        Ok(EncodedStream {
            shape,
            steps: (0..maps.len()).collect(),
            maps,
        })
    }

    pub fn timesteps(&self) -> usize {
        self.steps.len()
    }

    pub fn positions(&self) -> usize {
        self.shape.0 * self.shape.1 * self.shape.2
    }

    /// Analog contribution at timestep `t`.
    pub fn contribution(&self, t: usize) -> Result<&[f64]> {
        let idx = self.steps.get(t).ok_or_else(|| {
            Error::invalid(format!(
                "timestep {t} outside stream of {} steps",
                self.steps.len()
            ))
        })?;
        Ok(&self.maps[*idx])
    }
}
