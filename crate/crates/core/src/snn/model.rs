//! Time-stepped SNN inference.
//!
//! Hidden weighted layers hold LIF neurons. The output layer is non-spiking
//! and sums its weighted input over all timesteps; the prediction is the
//! argmax of that sum.

use super::arch::LayerSpec;
use super::kernels::{avgpool_forward, conv_forward_sparse, linear_forward_sparse};
use super::lif::lif_step;
use super::network::Network;
use crate::encoder::SpikeTrain;
use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SnnModel {
    pub network: Network,
    /// One threshold per LIF layer, in layer order.
    pub thresholds: Vec<f32>,
    pub leak: f32,
}

/// Per-timestep tensors kept for backpropagation through time.
#[derive(Debug, Clone, Default)]
pub struct Record {
    pub timesteps: usize,
    /// Input activation of every weighted layer, `T × in_len`, indexed by layer.
    pub inputs: Vec<Vec<f32>>,
    /// Membrane after integration, `T × out_len`, for LIF layers only.
    pub membranes: Vec<Vec<f32>>,
}

#[derive(Debug, Clone)]
pub struct ForwardResult {
    /// Accumulated output-layer potentials.
    pub output: Vec<f32>,
    /// Spikes emitted per LIF layer, in layer order.
    pub spike_counts: Vec<u64>,
    pub record: Option<Record>,
}

impl ForwardResult {
    pub fn predict(&self) -> Result<usize> {
        classify(&self.output)
    }
}

#[derive(Default)]
pub struct ForwardOptions<'a> {
    /// Fixed multiplicative mask per layer index (only dropout layers read it).
    pub dropout_masks: Option<&'a [Vec<f32>]>,
    pub record: bool,
}

/// Index of the largest potential; ties go to the lowest index.
pub fn classify(potentials: &[f32]) -> Result<usize> {
    if potentials.is_empty() {
        return Err(invalid("no output potentials"));
    }
    if potentials.iter().any(|v| v.is_nan()) {
        return Err(Error::NumericFault("NaN output potential".into()));
    }
    let mut best = 0;
    for (i, &v) in potentials.iter().enumerate().skip(1) {
        if v > potentials[best] {
            best = i;
        }
    }
    Ok(best)
}

type Probe<'p> = (usize, &'p mut dyn FnMut(&[f32]));

impl SnnModel {
    pub fn new(network: Network, thresholds: Vec<f32>, leak: f32) -> Result<Self> {
        let lif = network.arch.lif_layers().len();
        if thresholds.len() != lif {
            return Err(invalid(format!(
                "{} thresholds for {lif} LIF layers",
                thresholds.len()
            )));
        }
        if thresholds.iter().any(|t| !t.is_finite() || *t <= 0.0) {
            return Err(invalid("thresholds must be positive and finite"));
        }
        Ok(SnnModel {
            network,
            thresholds,
            leak,
        })
    }

    pub fn forward(&self, input: &SpikeTrain, opts: &ForwardOptions<'_>) -> Result<ForwardResult> {
        self.run(input, opts, None)
    }

    /// Runs up to LIF layer `lif_index` and hands its pre-activation at every
    /// timestep to `probe`. Layers beyond it are not evaluated.
    pub fn probe_preactivations(
        &self,
        input: &SpikeTrain,
        lif_index: usize,
        probe: &mut dyn FnMut(&[f32]),
    ) -> Result<()> {
        if lif_index >= self.network.arch.lif_layers().len() {
            return Err(invalid(format!("no LIF layer {lif_index}")));
        }
        self.run(input, &ForwardOptions::default(), Some((lif_index, probe)))
            .map(|_| ())
    }

    fn run(
        &self,
        input: &SpikeTrain,
        opts: &ForwardOptions<'_>,
        mut probe: Option<Probe<'_>>,
    ) -> Result<ForwardResult> {
        let arch = &self.network.arch;
        let [c, h, w] = arch.input_shape();
        if input.shape != (c, h, w) {
            return Err(invalid(format!(
                "spike input shape {:?} does not match network input {:?}",
                input.shape,
                [c, h, w]
            )));
        }
        let t_steps = input.timesteps;
        let layers = arch.layers();
        let out_layer = arch.output_layer();
        let lif_layers = arch.lif_layers();
        let mut lif_slot = vec![usize::MAX; layers.len()];
        for (k, &l) in lif_layers.iter().enumerate() {
            lif_slot[l] = k;
        }
        let mut membranes: Vec<Vec<f32>> = lif_layers
            .iter()
            .map(|&l| vec![0.0; arch.out_len(l)])
            .collect();
        let mut spikes: Vec<Vec<f32>> = membranes.clone();
        let mut counts = vec![0u64; lif_layers.len()];
        let mut output = vec![0.0f32; arch.num_classes()];
        let mut record = opts.record.then(|| Record {
            timesteps: t_steps,
            inputs: (0..layers.len())
                .map(|l| {
                    if layers[l].is_weighted() {
                        Vec::with_capacity(t_steps * arch.in_len(l))
                    } else {
                        Vec::new()
                    }
                })
                .collect(),
            membranes: lif_layers
                .iter()
                .map(|&l| Vec::with_capacity(t_steps * arch.out_len(l)))
                .collect(),
        });
        let mut cur: Vec<f32> = Vec::new();
        let mut next: Vec<f32> = Vec::new();
        let mut scratch = Vec::new();

        'time: for t in 0..t_steps {
            cur.clear();
            cur.extend(input.step(t).iter().map(|&s| f32::from(s)));
            for (l, layer) in layers.iter().enumerate() {
                next.clear();
                next.resize(arch.out_len(l), 0.0);
                match layer {
                    LayerSpec::Conv { .. } | LayerSpec::Linear { .. } => {
                        if let Some(rec) = record.as_mut() {
                            rec.inputs[l].extend_from_slice(&cur);
                        }
                        let wts = &self.network.weights[l];
                        match arch.conv_spec(l) {
                            Some(spec) => conv_forward_sparse(&cur, &spec, wts, &mut next),
                            None => linear_forward_sparse(&cur, wts, &mut next, &mut scratch),
                        }
                        if l == out_layer {
                            for (o, v) in output.iter_mut().zip(&next) {
                                *o += v;
                            }
                            continue;
                        }
                        let k = lif_slot[l];
                        if let Some((target, f)) = probe.as_mut() {
                            if *target == k {
                                f(&next);
                                continue 'time;
                            }
                        }
                        counts[k] += lif_step(
                            &mut membranes[k],
                            &mut spikes[k],
                            &next,
                            self.thresholds[k],
                            self.leak,
                        )? as u64;
                        if let Some(rec) = record.as_mut() {
                            rec.membranes[k].extend_from_slice(&membranes[k]);
                        }
                        next.copy_from_slice(&spikes[k]);
                    }
                    LayerSpec::AvgPool { window } => {
                        let [pc, ph, pw] = arch.in_shape(l);
                        avgpool_forward(&cur, pc, ph, pw, *window, &mut next);
                    }
                    LayerSpec::Dropout { .. } => match opts.dropout_masks {
                        Some(masks) => {
                            for ((o, v), m) in next.iter_mut().zip(&cur).zip(&masks[l]) {
                                *o = v * m;
                            }
                        }
                        None => next.copy_from_slice(&cur),
                    },
                }
                std::mem::swap(&mut cur, &mut next);
            }
        }
        if output.iter().any(|v| v.is_nan()) {
            return Err(Error::NumericFault("NaN output potential".into()));
        }
        Ok(ForwardResult {
            output,
            spike_counts: counts,
            record,
        })
    }
}
