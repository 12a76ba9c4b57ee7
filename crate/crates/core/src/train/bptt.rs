//! Backpropagation through time with a surrogate spike derivative.
//!
//! Unrolled graph for a LIF layer (`s(u)` is the surrogate):
//!
//! ```text
//! u[t+1] = λ·u[t] + W·a[t+1] − v_th·o[t]      o[t] = H(u[t] − v_th)
//! dL/do[t] = e[t] − v_th · dL/du[t+1]
//! dL/du[t] = dL/do[t] · s(u[t]) + λ · dL/du[t+1]
//! dL/dW   += dL/du[t] ⊗ a[t]
//! ```
//!
//! `e[t]` is the error arriving from the layer above at the same step. The
//! output layer sums `W·a[t]` over time, so its gradient is `(z − y) ⊗ Σ a[t]`
//! and every step sees the same error `z − y`.

use super::batch_gradient;
use super::loss::softmax_loss;
use super::optim::Optimizer;
use super::surrogate::{surrogate_f32, SurrogateParams};
use crate::encoder::SpikeTrain;
use crate::error::{invalid, Error, Result};
use crate::snn::kernels::{avgpool_backward, conv_backward, linear_backward};
use crate::snn::{ForwardOptions, LayerSpec, Record, SnnModel};

/// Accumulates into `grads` the surrogate gradient of a loss whose gradient
/// with respect to the accumulated output potentials is `grad_out`.
pub fn snn_backward(
    model: &SnnModel,
    record: Option<&Record>,
    masks: Option<&[Vec<f32>]>,
    grad_out: &[f32],
    surrogate: &SurrogateParams,
    grads: &mut [Vec<f32>],
) -> Result<()> {
    let record =
        record.ok_or_else(|| Error::InvalidState("forward pass kept no records".into()))?;
    let arch = &model.network.arch;
    if grad_out.len() != arch.num_classes() {
        return Err(invalid("output gradient has the wrong length"));
    }
    let layers = arch.layers();
    let out_layer = arch.output_layer();
    let lif = arch.lif_layers();
    let mut slot = vec![usize::MAX; layers.len()];
    for (k, &l) in lif.iter().enumerate() {
        slot[l] = k;
    }
    let lowest = arch.weighted_layers()[0];
    let gamma = surrogate.gamma as f32;
    let leak = model.leak;
    let mut gu_next: Vec<Vec<f32>> = lif.iter().map(|&l| vec![0.0; arch.out_len(l)]).collect();
    let steps = record.timesteps;
    for t in (0..steps).rev() {
        let mut g = grad_out.to_vec();
        for l in (lowest..layers.len()).rev() {
            let in_len = arch.in_len(l);
            let need_input = l > lowest;
            let mut gi = vec![0.0f32; if need_input { in_len } else { 0 }];
            match &layers[l] {
                LayerSpec::Conv { .. } | LayerSpec::Linear { .. } => {
                    if l != out_layer {
                        let k = slot[l];
                        let n = arch.out_len(l);
                        let u = &record.membranes[k][t * n..(t + 1) * n];
                        let v_th = model.thresholds[k];
                        for ((gv, carry), &ui) in g.iter_mut().zip(gu_next[k].iter_mut()).zip(u) {
                            let go = *gv - v_th * *carry;
                            let gu = go * surrogate_f32(ui, v_th, gamma) + leak * *carry;
                            *carry = gu;
                            *gv = gu;
                        }
                    }
                    let a = &record.inputs[l][t * in_len..(t + 1) * in_len];
                    let gin = need_input.then_some(gi.as_mut_slice());
                    match arch.conv_spec(l) {
                        Some(spec) => conv_backward(
                            a,
                            &g,
                            &spec,
                            &model.network.weights[l],
                            &mut grads[l],
                            gin,
                        ),
                        None => {
                            linear_backward(a, &g, &model.network.weights[l], &mut grads[l], gin)
                        }
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
    Ok(())
}

/// Summed loss and correct count over a batch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatchStats {
    pub loss_sum: f64,
    pub correct: usize,
    pub samples: usize,
}

/// Loss and gradient contribution of one sample.
pub(crate) fn sample_gradient(
    model: &SnnModel,
    input: &SpikeTrain,
    label: usize,
    masks: Option<&[Vec<f32>]>,
    surrogate: &SurrogateParams,
    grads: &mut [Vec<f32>],
) -> Result<(f64, bool)> {
    let fwd = model.forward(
        input,
        &ForwardOptions {
            dropout_masks: masks,
            record: true,
        },
    )?;
    let z: Vec<f64> = fwd.output.iter().map(|&v| f64::from(v)).collect();
    let (loss, grad) = softmax_loss(&z, label)?;
    let g32: Vec<f32> = grad.iter().map(|&v| v as f32).collect();
    snn_backward(model, fwd.record.as_ref(), masks, &g32, surrogate, grads)?;
    Ok((loss, fwd.predict()? == label))
}

/// One optimizer step on the mean surrogate gradient of `batch`. `masks`
/// holds one dropout mask set per sample, or is empty for no dropout.
pub fn bptt_update(
    model: &mut SnnModel,
    batch: &[(&SpikeTrain, usize)],
    masks: &[Vec<Vec<f32>>],
    opt: &mut Optimizer,
    surrogate: &SurrogateParams,
) -> Result<BatchStats> {
    if batch.is_empty() {
        return Err(invalid("empty batch"));
    }
    if !masks.is_empty() && masks.len() != batch.len() {
        return Err(invalid("one dropout mask set per sample required"));
    }
    let idx: Vec<usize> = (0..batch.len()).collect();
    let m = &*model;
    let (grads, loss_sum, correct) = batch_gradient(&model.network.weights, &idx, |_, s, g| {
        let mask = masks.get(s).map(Vec::as_slice);
        sample_gradient(m, batch[s].0, batch[s].1, mask, surrogate, g)
    })?;
    opt.step(&mut model.network.weights, &grads)?;
    Ok(BatchStats {
        loss_sum,
        correct,
        samples: batch.len(),
    })
}
