//! ANN pretraining, ANN→SNN conversion, and surrogate-gradient BPTT.

pub mod ann;
pub mod bptt;
pub mod convert;
pub mod loss;
pub mod optim;
pub mod pipeline;
pub mod surrogate;

use rayon::prelude::*;

pub use ann::{
    ann_backward, ann_forward, ann_predict, check_conversion_constraints, dropout_masks,
    evaluate_ann, train_ann_epoch, EpochStats,
};
pub use bptt::{bptt_update, snn_backward, BatchStats};
pub use convert::balance_thresholds;
pub use loss::softmax_loss;
pub use optim::{step_decay, Optimizer, OptimizerKind};
pub use pipeline::{
    evaluate_snn, read_metrics, train_ann, train_snn, train_snn_epoch, write_metrics, EpochMetrics,
    EvalResult, SpikeSource,
};
pub use surrogate::{surrogate_grad, SurrogateParams};

use crate::error::{config, Result};
use crate::rng::substream;

/// Optimizer, schedule and batching for one training stage.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub optimizer: OptimizerKind,
    pub lr: f64,
    /// Multiplicative learning-rate decay applied every `lr_step` epochs.
    pub lr_decay: f64,
    pub lr_step: usize,
    pub momentum: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(config(format!(
                "learning rate must be positive, got {}",
                self.lr
            )));
        }
        if self.lr_step == 0 {
            return Err(config("learning-rate step must be positive"));
        }
        if self.batch_size == 0 {
            return Err(config("batch size must be positive"));
        }
        if !(self.lr_decay > 0.0 && self.weight_decay >= 0.0 && (0.0..1.0).contains(&self.momentum))
        {
            return Err(config("decay, weight decay or momentum out of range"));
        }
        Ok(())
    }

    pub fn optimizer(&self) -> Optimizer {
        Optimizer::new(self.optimizer, self.lr, self.momentum, self.weight_decay)
    }

    pub fn lr_at(&self, epoch: usize) -> f64 {
        step_decay(self.lr, self.lr_decay, self.lr_step, epoch)
    }
}

/// Per-epoch sample order.
pub fn shuffled_order(n: usize, seed: u64, epoch: usize) -> Vec<usize> {
    use rand::seq::SliceRandom;
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut substream(seed, "shuffle", epoch as u64));
    idx
}

// Samples per reduction chunk; fixed so results do not depend on thread count.
const REDUCE_CHUNK: usize = 8;

/// Mean gradient over `samples`. `per_sample` receives the position in the
/// batch, the sample index and the gradient accumulator. Chunks run in
/// parallel, each summing its samples in order; chunk sums are then added in
/// chunk order.
pub(crate) fn batch_gradient<F>(
    shape: &[Vec<f32>],
    samples: &[usize],
    per_sample: F,
) -> Result<(Vec<Vec<f32>>, f64, usize)>
where
    F: Fn(usize, usize, &mut [Vec<f32>]) -> Result<(f64, bool)> + Sync,
{
    let zeros = || {
        shape
            .iter()
            .map(|w| vec![0.0f32; w.len()])
            .collect::<Vec<_>>()
    };
    type Partial = Result<(Vec<Vec<f32>>, f64, usize)>;
    let partial: Vec<Partial> = samples
        .par_chunks(REDUCE_CHUNK)
        .enumerate()
        .map(|(ci, chunk)| {
            let mut g = zeros();
            let mut loss = 0.0;
            let mut correct = 0;
            for (j, &s) in chunk.iter().enumerate() {
                let (l, ok) = per_sample(ci * REDUCE_CHUNK + j, s, &mut g)?;
                loss += l;
                correct += usize::from(ok);
            }
            Ok((g, loss, correct))
        })
        .collect();
    let mut total = zeros();
    let mut loss = 0.0;
    let mut correct = 0;
    for p in partial {
        let (g, l, c) = p?;
        for (t, gi) in total.iter_mut().zip(&g) {
            for (a, b) in t.iter_mut().zip(gi) {
                *a += b;
            }
        }
        loss += l;
        correct += c;
    }
    let scale = 1.0 / samples.len().max(1) as f32;
    total.iter_mut().flatten().for_each(|v| *v *= scale);
    Ok((total, loss, correct))
}
