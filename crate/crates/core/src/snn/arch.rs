//! Layer descriptors and shape bookkeeping.
//!
//! A descriptor is a comma-separated list such as
//! `conv:1:8:3:1:1,avgpool:2,linear:1568:10`; the input shape travels
//! separately. The last layer must be weighted: it is the non-spiking output
//! accumulator.

use std::fmt;

use crate::error::{config, Result};

/// A layer in the shared ANN/SNN topology. Weighted layers carry no bias.
#[derive(Debug, Clone, PartialEq)]
pub enum LayerSpec {
    Conv {
        c_in: usize,
        c_out: usize,
        kernel: usize,
        stride: usize,
        pad: usize,
    },
    Linear {
        n_in: usize,
        n_out: usize,
    },
    AvgPool {
        window: usize,
    },
    Dropout {
        rate: f64,
    },
}

impl LayerSpec {
    pub fn is_weighted(&self) -> bool {
        matches!(self, LayerSpec::Conv { .. } | LayerSpec::Linear { .. })
    }
}

impl fmt::Display for LayerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LayerSpec::Conv {
                c_in,
                c_out,
                kernel,
                stride,
                pad,
            } => {
                write!(f, "conv:{c_in}:{c_out}:{kernel}:{stride}:{pad}")
            }
            LayerSpec::Linear { n_in, n_out } => write!(f, "linear:{n_in}:{n_out}"),
            LayerSpec::AvgPool { window } => write!(f, "avgpool:{window}"),
            LayerSpec::Dropout { rate } => write!(f, "dropout:{rate}"),
        }
    }
}

/// A convolution with its input extent resolved.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvSpec {
    pub c_in: usize,
    pub c_out: usize,
    pub kernel: usize,
    pub stride: usize,
    pub pad: usize,
    pub in_h: usize,
    pub in_w: usize,
}

impl ConvSpec {
    pub fn out_hw(&self) -> (usize, usize) {
        (
            (self.in_h + 2 * self.pad - self.kernel) / self.stride + 1,
            (self.in_w + 2 * self.pad - self.kernel) / self.stride + 1,
        )
    }
}

/// `(channels, height, width)`; linear layers produce `(n, 1, 1)`.
pub type Shape = [usize; 3];

fn numel(s: &Shape) -> usize {
    s[0] * s[1] * s[2]
}

#[derive(Debug, Clone, PartialEq)]
pub struct Architecture {
    input: Shape,
    layers: Vec<LayerSpec>,
    // shapes[i] is the input of layer i; shapes[len] is the network output
    shapes: Vec<Shape>,
}

impl Architecture {
    pub fn new(input: Shape, layers: Vec<LayerSpec>) -> Result<Self> {
        if numel(&input) == 0 {
            return Err(config(format!("input shape {input:?} is empty")));
        }
        match layers.last() {
            Some(l) if l.is_weighted() => {}
            Some(l) => return Err(config(format!("last layer `{l}` must be conv or linear"))),
            None => return Err(config("architecture has no layers")),
        }
        let mut shapes = vec![input];
        let mut cur = input;
        for (i, layer) in layers.iter().enumerate() {
            let [c, h, w] = cur;
            cur = match *layer {
                LayerSpec::Conv {
                    c_in,
                    c_out,
                    kernel,
                    stride,
                    pad,
                } => {
                    if c_in != c {
                        return Err(config(format!(
                            "layer {i} `{layer}` expects {c_in} channels, got {c}"
                        )));
                    }
                    if kernel == 0 || stride == 0 || c_out == 0 {
                        return Err(config(format!("layer {i} `{layer}` has a zero parameter")));
                    }
                    if h + 2 * pad < kernel || w + 2 * pad < kernel {
                        return Err(config(format!(
                            "layer {i} `{layer}` kernel exceeds padded {h}x{w} input"
                        )));
                    }
                    let spec = ConvSpec {
                        c_in,
                        c_out,
                        kernel,
                        stride,
                        pad,
                        in_h: h,
                        in_w: w,
                    };
                    let (oh, ow) = spec.out_hw();
                    [c_out, oh, ow]
                }
                LayerSpec::Linear { n_in, n_out } => {
                    if n_in != numel(&cur) {
                        return Err(config(format!(
                            "layer {i} `{layer}` expects {n_in} inputs, previous layer yields {} ({c}x{h}x{w})",
                            numel(&cur)
                        )));
                    }
                    if n_out == 0 {
                        return Err(config(format!("layer {i} `{layer}` has no outputs")));
                    }
                    [n_out, 1, 1]
                }
                LayerSpec::AvgPool { window } => {
                    if window == 0 || h % window != 0 || w % window != 0 {
                        return Err(config(format!(
                            "layer {i} `{layer}` does not divide a {h}x{w} input"
                        )));
                    }
                    [c, h / window, w / window]
                }
                LayerSpec::Dropout { rate } => {
                    if !(0.0..1.0).contains(&rate) {
                        return Err(config(format!(
                            "layer {i} dropout rate {rate} outside [0, 1)"
                        )));
                    }
                    cur
                }
            };
            shapes.push(cur);
        }
        Ok(Architecture {
            input,
            layers,
            shapes,
        })
    }

    /// Parses a descriptor string for the given input shape.
    pub fn parse(input: Shape, descriptor: &str) -> Result<Self> {
        let mut layers = Vec::new();
        for (i, item) in descriptor.split(',').map(str::trim).enumerate() {
            let parts: Vec<&str> = item.split(':').collect();
            let num = |j: usize| -> Result<usize> {
                parts.get(j).and_then(|s| s.parse().ok()).ok_or_else(|| {
                    config(format!(
                        "layer {i} `{item}`: field {j} is not a non-negative integer"
                    ))
                })
            };
            let arity = |n: usize| -> Result<()> {
                if parts.len() == n {
                    Ok(())
                } else {
                    Err(config(format!(
                        "layer {i} `{item}`: expected {} fields, found {}",
                        n - 1,
                        parts.len() - 1
                    )))
                }
            };
            let layer = match parts[0] {
                "conv" => {
                    arity(6)?;
                    LayerSpec::Conv {
                        c_in: num(1)?,
                        c_out: num(2)?,
                        kernel: num(3)?,
                        stride: num(4)?,
                        pad: num(5)?,
                    }
                }
                "linear" => {
                    arity(3)?;
                    LayerSpec::Linear {
                        n_in: num(1)?,
                        n_out: num(2)?,
                    }
                }
                "avgpool" => {
                    arity(2)?;
                    LayerSpec::AvgPool { window: num(1)? }
                }
                "dropout" => {
                    arity(2)?;
                    let rate: f64 = parts[1]
                        .parse()
                        .map_err(|_| config(format!("layer {i} `{item}`: bad dropout rate")))?;
                    LayerSpec::Dropout { rate }
                }
                other => return Err(config(format!("layer {i}: unknown layer type `{other}`"))),
            };
            layers.push(layer);
        }
        Self::new(input, layers)
    }

    /// Named topologies. `enlarge > 1` inserts an extra average pool of that
    /// window before the first linear layer, matching an input map enlarged by
    /// overlapping blocks.
    pub fn preset(name: &str, input: Shape, classes: usize, enlarge: usize) -> Result<Self> {
        let c = input[0];
        let mut convs: Vec<LayerSpec> = match name {
            "tiny" => vec![
                LayerSpec::Conv {
                    c_in: c,
                    c_out: 4,
                    kernel: 3,
                    stride: 1,
                    pad: 1,
                },
                LayerSpec::AvgPool { window: 2 },
            ],
            "digits" => vec![
                LayerSpec::Conv {
                    c_in: c,
                    c_out: 8,
                    kernel: 3,
                    stride: 1,
                    pad: 1,
                },
                LayerSpec::AvgPool { window: 2 },
                LayerSpec::Conv {
                    c_in: 8,
                    c_out: 16,
                    kernel: 3,
                    stride: 1,
                    pad: 1,
                },
                LayerSpec::AvgPool { window: 2 },
            ],
            "vgg5" => vec![
                LayerSpec::Conv {
                    c_in: c,
                    c_out: 64,
                    kernel: 3,
                    stride: 1,
                    pad: 1,
                },
                LayerSpec::AvgPool { window: 2 },
                LayerSpec::Conv {
                    c_in: 64,
                    c_out: 128,
                    kernel: 3,
                    stride: 1,
                    pad: 1,
                },
                LayerSpec::Conv {
                    c_in: 128,
                    c_out: 128,
                    kernel: 3,
                    stride: 1,
                    pad: 1,
                },
                LayerSpec::AvgPool { window: 2 },
            ],
            other => {
                return Err(config(format!(
                    "unknown architecture preset `{other}` (tiny, digits, vgg5)"
                )))
            }
        };
        if enlarge > 1 {
            convs.push(LayerSpec::AvgPool { window: enlarge });
        }
        let mut cur = input;
        for l in &convs {
            cur = match *l {
                LayerSpec::Conv {
                    c_out,
                    kernel,
                    stride,
                    pad,
                    ..
                } => [
                    c_out,
                    (cur[1] + 2 * pad).saturating_sub(kernel) / stride + 1,
                    (cur[2] + 2 * pad).saturating_sub(kernel) / stride + 1,
                ],
                LayerSpec::AvgPool { window } => [cur[0], cur[1] / window, cur[2] / window],
                _ => cur,
            };
        }
        let flat = numel(&cur);
        let head = match name {
            "tiny" => vec![LayerSpec::Linear {
                n_in: flat,
                n_out: classes,
            }],
            "digits" => vec![
                LayerSpec::Linear {
                    n_in: flat,
                    n_out: 64,
                },
                LayerSpec::Dropout { rate: 0.2 },
                LayerSpec::Linear {
                    n_in: 64,
                    n_out: classes,
                },
            ],
            _ => vec![
                LayerSpec::Linear {
                    n_in: flat,
                    n_out: 1024,
                },
                LayerSpec::Dropout { rate: 0.2 },
                LayerSpec::Linear {
                    n_in: 1024,
                    n_out: 1024,
                },
                LayerSpec::Dropout { rate: 0.2 },
                LayerSpec::Linear {
                    n_in: 1024,
                    n_out: classes,
                },
            ],
        };
        convs.extend(head);
        Self::new(input, convs)
    }

    pub fn input_shape(&self) -> Shape {
        self.input
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn in_shape(&self, layer: usize) -> Shape {
        self.shapes[layer]
    }

    pub fn out_shape(&self, layer: usize) -> Shape {
        self.shapes[layer + 1]
    }

    pub fn in_len(&self, layer: usize) -> usize {
        numel(&self.shapes[layer])
    }

    pub fn out_len(&self, layer: usize) -> usize {
        numel(&self.shapes[layer + 1])
    }

    pub fn num_classes(&self) -> usize {
        numel(self.shapes.last().expect("non-empty"))
    }

    /// Index of the output (last) layer.
    pub fn output_layer(&self) -> usize {
        self.layers.len() - 1
    }

    /// Weighted layers other than the output: these hold LIF neurons.
    pub fn lif_layers(&self) -> Vec<usize> {
        (0..self.output_layer())
            .filter(|&i| self.layers[i].is_weighted())
            .collect()
    }

    pub fn weighted_layers(&self) -> Vec<usize> {
        (0..self.layers.len())
            .filter(|&i| self.layers[i].is_weighted())
            .collect()
    }

    /// Number of weights of a layer (zero for unweighted layers).
    pub fn weight_count(&self, layer: usize) -> usize {
        match self.layers[layer] {
            LayerSpec::Conv {
                c_in,
                c_out,
                kernel,
                ..
            } => c_out * c_in * kernel * kernel,
            LayerSpec::Linear { n_in, n_out } => n_in * n_out,
            _ => 0,
        }
    }

    /// Fan-in and fan-out used for weight initialisation.
    pub fn fans(&self, layer: usize) -> (usize, usize) {
        match self.layers[layer] {
            LayerSpec::Conv {
                c_in,
                c_out,
                kernel,
                ..
            } => (c_in * kernel * kernel, c_out * kernel * kernel),
            LayerSpec::Linear { n_in, n_out } => (n_in, n_out),
            _ => (0, 0),
        }
    }

    pub fn conv_spec(&self, layer: usize) -> Option<ConvSpec> {
        match self.layers[layer] {
            LayerSpec::Conv {
                c_in,
                c_out,
                kernel,
                stride,
                pad,
            } => {
                let [_, h, w] = self.shapes[layer];
                Some(ConvSpec {
                    c_in,
                    c_out,
                    kernel,
                    stride,
                    pad,
                    in_h: h,
                    in_w: w,
                })
            }
            _ => None,
        }
    }

    pub fn descriptor(&self) -> String {
        self.layers
            .iter()
            .map(ToString::to_string)
            .collect::<Vec<_>>()
            .join(",")
    }
}
