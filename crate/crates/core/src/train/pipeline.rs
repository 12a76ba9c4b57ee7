//! Epoch loops for the hybrid pipeline: ANN pretraining, SNN fine-tuning or
//! from-scratch training, and SNN evaluation.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;

use super::ann::{dropout_masks, evaluate_ann, train_ann_epoch, EpochStats};
use super::bptt::bptt_update;
use super::optim::Optimizer;
use super::surrogate::SurrogateParams;
use super::{shuffled_order, TrainConfig};
use crate::data::Image;
use crate::encoder::{FrequencySchedule, InputEncoder, SpikeTrain};
use crate::error::{invalid, Error, Result};
use crate::snn::{ForwardOptions, Network, SnnModel};

// Poisson draws for evaluation use indices disjoint from training draws.
const EVAL_DRAW_OFFSET: u64 = 1 << 48;

/// Encodes dataset images on demand under a fixed schedule.
pub struct SpikeSource<'a> {
    pub encoder: &'a InputEncoder,
    pub schedule: FrequencySchedule,
    pub images: &'a [Image],
}

impl<'a> SpikeSource<'a> {
    pub fn new(
        encoder: &'a InputEncoder,
        schedule: FrequencySchedule,
        images: &'a [Image],
    ) -> Self {
        SpikeSource {
            encoder,
            schedule,
            images,
        }
    }

    /// Spike train of image `idx`; `draw` picks the Poisson substream.
    pub fn encode(&self, idx: usize, draw: u64) -> Result<SpikeTrain> {
        self.encoder.encode(&self.images[idx], &self.schedule, draw)
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }
}

/// One row of the per-epoch metrics file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub test_acc: f64,
    pub wall_seconds: f64,
}

pub fn write_metrics(path: &Path, rows: &[EpochMetrics]) -> Result<()> {
    let mut out = String::from("epoch,train_loss,train_acc,test_acc,wall_seconds\n");
    for r in rows {
        out.push_str(&format!(
            "{},{:.6},{:.6},{:.6},{:.3}\n",
            r.epoch, r.train_loss, r.train_acc, r.test_acc, r.wall_seconds
        ));
    }
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
}

/// Reads a file written by [`write_metrics`].
pub fn read_metrics(path: &Path) -> Result<Vec<EpochMetrics>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    if lines.next() != Some("epoch,train_loss,train_acc,test_acc,wall_seconds") {
        return Err(invalid(format!("{} is not a metrics file", path.display())));
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let bad = || invalid(format!("{}: malformed row {}", path.display(), i + 2));
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 5 {
                return Err(bad());
            }
            let num = |s: &str| s.parse::<f64>().map_err(|_| bad());
            Ok(EpochMetrics {
                epoch: f[0].parse().map_err(|_| bad())?,
                train_loss: num(f[1])?,
                train_acc: num(f[2])?,
                test_acc: num(f[3])?,
                wall_seconds: num(f[4])?,
            })
        })
        .collect()
}

/// Callback run after every epoch with the metrics row.
pub type EpochHook<'h, M> = dyn FnMut(&EpochMetrics, &M, &Optimizer) -> Result<()> + 'h;

/// Trains on precomputed analog inputs for epochs `start..cfg.epochs`.
#[allow(clippy::too_many_arguments)]
pub fn train_ann(
    net: &mut Network,
    opt: &mut Optimizer,
    train: (&[Vec<f32>], &[usize]),
    test: (&[Vec<f32>], &[usize]),
    cfg: &TrainConfig,
    start: usize,
    timing: bool,
    hook: &mut EpochHook<'_, Network>,
) -> Result<Vec<EpochMetrics>> {
    let mut rows = Vec::new();
    for epoch in start..cfg.epochs {
        let t0 = Instant::now();
        let EpochStats { loss, accuracy } =
            train_ann_epoch(net, opt, train.0, train.1, cfg, epoch)?;
        let test_acc = evaluate_ann(net, test.0, test.1)?;
        let row = EpochMetrics {
            epoch: epoch + 1,
            train_loss: loss,
            train_acc: accuracy,
            test_acc,
            wall_seconds: if timing {
                t0.elapsed().as_secs_f64()
            } else {
                0.0
            },
        };
        hook(&row, net, opt)?;
        rows.push(row);
    }
    Ok(rows)
}

/// One epoch of surrogate-gradient training over `source`.
pub fn train_snn_epoch(
    model: &mut SnnModel,
    opt: &mut Optimizer,
    source: &SpikeSource<'_>,
    labels: &[usize],
    cfg: &TrainConfig,
    surrogate: &SurrogateParams,
    epoch: usize,
) -> Result<EpochStats> {
    cfg.validate()?;
    if source.is_empty() || source.len() != labels.len() {
        return Err(invalid("training set is empty or labels are missing"));
    }
    opt.lr = cfg.lr_at(epoch);
    let n = source.len();
    let order = shuffled_order(n, cfg.seed, epoch);
    let mut loss = 0.0;
    let mut correct = 0;
    for (b, batch) in order.chunks(cfg.batch_size).enumerate() {
        let base = (epoch * n + b * cfg.batch_size) as u64;
        let trains = batch
            .par_iter()
            .enumerate()
            .map(|(j, &i)| source.encode(i, base + j as u64))
            .collect::<Result<Vec<_>>>()?;
        let masks: Vec<Vec<Vec<f32>>> = (0..batch.len())
            .map(|j| {
                dropout_masks(
                    &model.network.arch,
                    cfg.seed,
                    "snn-dropout",
                    base + j as u64,
                )
            })
            .collect();
        let pairs: Vec<(&SpikeTrain, usize)> = trains
            .iter()
            .zip(batch)
            .map(|(t, &i)| (t, labels[i]))
            .collect();
        let stats = bptt_update(model, &pairs, &masks, opt, surrogate)?;
        loss += stats.loss_sum;
        correct += stats.correct;
    }
    Ok(EpochStats {
        loss: loss / n as f64,
        accuracy: correct as f64 / n as f64,
    })
}

/// Runs SNN training epochs `start..cfg.epochs`, evaluating on `test` after each.
#[allow(clippy::too_many_arguments)]
pub fn train_snn(
    model: &mut SnnModel,
    opt: &mut Optimizer,
    train: (&SpikeSource<'_>, &[usize]),
    test: (&SpikeSource<'_>, &[usize]),
    cfg: &TrainConfig,
    surrogate: &SurrogateParams,
    start: usize,
    timing: bool,
    hook: &mut EpochHook<'_, SnnModel>,
) -> Result<Vec<EpochMetrics>> {
    let mut rows = Vec::new();
    for epoch in start..cfg.epochs {
        let t0 = Instant::now();
        let stats = train_snn_epoch(model, opt, train.0, train.1, cfg, surrogate, epoch)?;
        let eval = evaluate_snn(model, test.0, test.1)?;
        let row = EpochMetrics {
            epoch: epoch + 1,
            train_loss: stats.loss,
            train_acc: stats.accuracy,
            test_acc: eval.accuracy,
            wall_seconds: if timing {
                t0.elapsed().as_secs_f64()
            } else {
                0.0
            },
        };
        hook(&row, model, opt)?;
        rows.push(row);
    }
    Ok(rows)
}

/// Accuracy and spike totals of an SNN over a labelled set.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalResult {
    pub accuracy: f64,
    pub correct: usize,
    pub images: usize,
    /// Total spikes per LIF layer over all images.
    pub spike_counts: Vec<u64>,
}

pub fn evaluate_snn(
    model: &SnnModel,
    source: &SpikeSource<'_>,
    labels: &[usize],
) -> Result<EvalResult> {
    if source.is_empty() || source.len() != labels.len() {
        return Err(invalid("evaluation set is empty or labels are missing"));
    }
    let per_image = (0..source.len())
        .into_par_iter()
        .map(|i| {
            let train = source.encode(i, EVAL_DRAW_OFFSET + i as u64)?;
            let r = model.forward(&train, &ForwardOptions::default())?;
            Ok((usize::from(r.predict()? == labels[i]), r.spike_counts))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut spike_counts = vec![0u64; model.thresholds.len()];
    let mut correct = 0;
    for (c, s) in per_image {
        correct += c;
        for (a, b) in spike_counts.iter_mut().zip(s) {
            *a += b;
        }
    }
    Ok(EvalResult {
        accuracy: correct as f64 / source.len() as f64,
        correct,
        images: source.len(),
        spike_counts,
    })
}
