//! Real-valued twin of the spiking network: ReLU in place of LIF neurons,
//! same weights, pooling and dropout placement.

use rand::Rng;

use super::loss::softmax_loss;
use super::optim::Optimizer;
use super::{batch_gradient, shuffled_order, TrainConfig};
use crate::error::{config, invalid, Result};
use crate::rng::substream;
use crate::snn::kernels::{
    avgpool_backward, avgpool_forward, conv_backward, conv_forward, linear_backward, linear_forward,
};
use crate::snn::{classify, Architecture, LayerSpec, MacSink, Network};

/// Rejects topologies that cannot be converted layer for layer.
pub fn check_conversion_constraints(arch: &Architecture) -> Result<()> {
    match arch.layers().last() {
        Some(LayerSpec::Linear { .. }) => Ok(()),
        _ => Err(config("the output layer must be linear")),
    }
}

/// Inverted-dropout masks (`0` or `1/keep`), one per layer index; empty for
/// layers that are not dropout.
pub fn dropout_masks(arch: &Architecture, seed: u64, label: &str, index: u64) -> Vec<Vec<f32>> {
    let mut rng = substream(seed, label, index);
    arch.layers()
        .iter()
        .enumerate()
        .map(|(l, layer)| match *layer {
            LayerSpec::Dropout { rate } => {
                let keep = 1.0 - rate;
                let scale = (1.0 / keep) as f32;
                (0..arch.in_len(l))
                    .map(|_| {
                        if rng.random::<f64>() < keep {
                            scale
                        } else {
                            0.0
                        }
                    })
                    .collect()
            }
            _ => Vec::new(),
        })
        .collect()
}

/// Activations at every layer boundary: `acts[l]` feeds layer `l`, the last
/// entry is the logits. Hidden weighted layers apply ReLU.
pub fn ann_forward_counted<S: MacSink>(
    net: &Network,
    input: &[f32],
    masks: Option<&[Vec<f32>]>,
    sink: &mut S,
) -> Result<Vec<Vec<f32>>> {
    let arch = &net.arch;
    if input.len() != arch.in_len(0) {
        return Err(invalid(format!(
            "input has {} values, network expects {}",
            input.len(),
            arch.in_len(0)
        )));
    }
    let out_layer = arch.output_layer();
    let mut acts = Vec::with_capacity(arch.layers().len() + 1);
    acts.push(input.to_vec());
    for (l, layer) in arch.layers().iter().enumerate() {
        let x = &acts[l];
        let mut y = vec![0.0f32; arch.out_len(l)];
        match layer {
            LayerSpec::Conv { .. } | LayerSpec::Linear { .. } => {
                match arch.conv_spec(l) {
                    Some(spec) => conv_forward(x, &spec, &net.weights[l], &mut y, sink),
                    None => linear_forward(x, y.len(), &net.weights[l], &mut y, sink),
                }
                if l != out_layer {
                    y.iter_mut().for_each(|v| *v = v.max(0.0));
                }
            }
            LayerSpec::AvgPool { window } => {
                let [c, h, w] = arch.in_shape(l);
                avgpool_forward(x, c, h, w, *window, &mut y);
            }
            LayerSpec::Dropout { .. } => match masks {
                Some(m) => y
                    .iter_mut()
                    .zip(x)
                    .zip(&m[l])
                    .for_each(|((o, v), k)| *o = v * k),
                None => y.copy_from_slice(x),
            },
        }
        acts.push(y);
    }
    Ok(acts)
}

pub fn ann_forward(
    net: &Network,
    input: &[f32],
    masks: Option<&[Vec<f32>]>,
) -> Result<Vec<Vec<f32>>> {
    ann_forward_counted(net, input, masks, &mut ())
}

/// Accumulates weight gradients of the loss whose logit gradient is
/// `grad_logits` into `grads`.
pub fn ann_backward(
    net: &Network,
    acts: &[Vec<f32>],
    masks: Option<&[Vec<f32>]>,
    grad_logits: &[f32],
    grads: &mut [Vec<f32>],
) {
    let arch = &net.arch;
    let out_layer = arch.output_layer();
    let mut g = grad_logits.to_vec();
    for l in (0..arch.layers().len()).rev() {
        let x = &acts[l];
        let need_input = l > 0;
        let mut gi = vec![0.0f32; if need_input { x.len() } else { 0 }];
        match &arch.layers()[l] {
            LayerSpec::Conv { .. } | LayerSpec::Linear { .. } => {
                if l != out_layer {
                    for (gv, y) in g.iter_mut().zip(&acts[l + 1]) {
                        if *y <= 0.0 {
                            *gv = 0.0;
                        }
                    }
                }
                let gin = need_input.then_some(gi.as_mut_slice());
                match arch.conv_spec(l) {
                    Some(spec) => conv_backward(x, &g, &spec, &net.weights[l], &mut grads[l], gin),
                    None => linear_backward(x, &g, &net.weights[l], &mut grads[l], gin),
                }
            }
            LayerSpec::AvgPool { window } => {
                if need_input {
                    let [c, h, w] = arch.in_shape(l);
                    avgpool_backward(&g, c, h, w, *window, &mut gi);
                }
            }
            LayerSpec::Dropout { .. } => {
                if need_input {
                    match masks {
                        Some(m) => gi
                            .iter_mut()
                            .zip(&g)
                            .zip(&m[l])
                            .for_each(|((o, v), k)| *o = v * k),
                        None => gi.copy_from_slice(&g),
                    }
                }
            }
        }
        if !need_input {
            break;
        }
        g = gi;
    }
}

pub fn ann_predict(net: &Network, input: &[f32]) -> Result<usize> {
    let acts = ann_forward(net, input, None)?;
    classify(acts.last().expect("logits"))
}

pub fn evaluate_ann(net: &Network, inputs: &[Vec<f32>], labels: &[usize]) -> Result<f64> {
    use rayon::prelude::*;
    if inputs.is_empty() {
        return Err(invalid("empty evaluation set"));
    }
    let correct = inputs
        .par_iter()
        .zip(labels)
        .map(|(x, &y)| ann_predict(net, x).map(|p| usize::from(p == y)))
        .collect::<Result<Vec<_>>>()?;
    Ok(correct.iter().sum::<usize>() as f64 / inputs.len() as f64)
}

/// Mean loss and accuracy over the samples seen during an epoch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub loss: f64,
    pub accuracy: f64,
}

/// One epoch of minibatch training; `epoch` selects the shuffle and dropout
/// streams and the learning rate.
pub fn train_ann_epoch(
    net: &mut Network,
    opt: &mut Optimizer,
    inputs: &[Vec<f32>],
    labels: &[usize],
    cfg: &TrainConfig,
    epoch: usize,
) -> Result<EpochStats> {
    cfg.validate()?;
    check_conversion_constraints(&net.arch)?;
    if inputs.is_empty() || inputs.len() != labels.len() {
        return Err(invalid("training set is empty or labels are missing"));
    }
    opt.lr = cfg.lr_at(epoch);
    let order = shuffled_order(inputs.len(), cfg.seed, epoch);
    let mut loss = 0.0;
    let mut correct = 0usize;
    for (b, batch) in order.chunks(cfg.batch_size).enumerate() {
        let base = (epoch * order.len() + b * cfg.batch_size) as u64;
        let net_ref = &*net;
        let (grads, l, c) = batch_gradient(&net.weights, batch, |pos, s, g| {
            let masks = dropout_masks(&net_ref.arch, cfg.seed, "ann-dropout", base + pos as u64);
            let acts = ann_forward(net_ref, &inputs[s], Some(&masks))?;
            let logits: Vec<f64> = acts
                .last()
                .expect("logits")
                .iter()
                .map(|&v| f64::from(v))
                .collect();
            let (l, grad) = softmax_loss(&logits, labels[s])?;
            let g32: Vec<f32> = grad.iter().map(|&v| v as f32).collect();
            ann_backward(net_ref, &acts, Some(&masks), &g32, g);
            Ok((l, classify(acts.last().expect("logits"))? == labels[s]))
        })?;
        opt.step(&mut net.weights, &grads)?;
        loss += l;
        correct += c;
    }
    Ok(EpochStats {
        loss: loss / inputs.len() as f64,
        accuracy: correct as f64 / inputs.len() as f64,
    })
}
