//! Operation counts and the ANN-to-SNN energy ratio.
//!
//! Only convolution and linear layers carry operations. Pooling, dropout and
//! the non-spiking output layer's accumulations are left out of both the ANN
//! and the SNN totals, and memory traffic is not modelled.

use std::fmt::Write as _;

use crate::encoder::{EncoderKind, FrequencySchedule, InputEncoder};
use crate::error::{invalid, Error, Result};
use crate::snn::{Architecture, LayerSpec, Shape};
use crate::transforms::BlockSpec;

/// Energy of one 32-bit multiply-accumulate at 45 nm, picojoules.
pub const MAC_PJ: f64 = 4.6;
/// Energy of one 32-bit addition at 45 nm, picojoules.
pub const ADD_PJ: f64 = 0.9;

/// Multiply-accumulates of one ANN pass through `layer` given its input shape.
pub fn ann_ops(layer: &LayerSpec, input: Shape) -> Result<u64> {
    match *layer {
        LayerSpec::Conv {
            c_in,
            c_out,
            kernel,
            stride,
            pad,
        } => {
            let [c, h, w] = input;
            if c != c_in || kernel == 0 || stride == 0 {
                return Err(invalid(format!("conv {layer} cannot take input {input:?}")));
            }
            if h + 2 * pad < kernel || w + 2 * pad < kernel {
                return Err(invalid(format!("kernel of {layer} exceeds padded input")));
            }
            let oh = (h + 2 * pad - kernel) / stride + 1;
            let ow = (w + 2 * pad - kernel) / stride + 1;
            Ok((kernel * kernel * c_in * oh * ow * c_out) as u64)
        }
        LayerSpec::Linear { n_in, n_out } => {
            if input.iter().product::<usize>() != n_in {
                return Err(invalid(format!(
                    "linear {layer} cannot take input {input:?}"
                )));
            }
            Ok((n_in * n_out) as u64)
        }
        LayerSpec::AvgPool { .. } | LayerSpec::Dropout { .. } => Ok(0),
    }
}

/// Mean spikes per neuron per image for each LIF layer, from totals summed
/// over `images` inputs.
pub fn spike_rates(arch: &Architecture, spike_totals: &[u64], images: usize) -> Result<Vec<f64>> {
    let lif = arch.lif_layers();
    if spike_totals.len() != lif.len() {
        return Err(invalid(format!(
            "{} spike totals for {} LIF layers",
            spike_totals.len(),
            lif.len()
        )));
    }
    if images == 0 {
        return Err(invalid("spike rates need at least one image"));
    }
    Ok(lif
        .iter()
        .zip(spike_totals)
        .map(|(&l, &s)| s as f64 / (arch.out_len(l) as f64 * images as f64))
        .collect())
}

/// Multiplies spent by the encoder on one image. Block transforms are paid
/// once per image, since later cycles replay the same contributions: each
/// block costs `2n³` for a separable transform or `n⁴` for a dense one, plus
/// `n²` per distinct basis reconstructed during a cycle.
pub fn encoder_ops(
    image: (usize, usize, usize),
    spec: &BlockSpec,
    separable: bool,
    schedule: &FrequencySchedule,
) -> Result<u64> {
    let n = spec.block_size;
    if schedule.block_size() != n {
        return Err(invalid("schedule block size differs from the block spec"));
    }
    let (c, h, w) = image;
    let (rows, cols) = spec.grid(h, w)?;
    let blocks = (c * rows * cols) as u64;
    let n = n as u64;
    let forward = if separable {
        2 * n * n * n
    } else {
        n * n * n * n
    };
    let reconstruction = n * n * schedule.distinct_bases() as u64;
    Ok(blocks * (forward + reconstruction))
}

/// [`encoder_ops`] for a configured encoder; the Poisson baseline costs none.
pub fn encoder_ops_for(encoder: &InputEncoder, schedule: &FrequencySchedule) -> Result<u64> {
    match (encoder.kind(), encoder.transform()) {
        (EncoderKind::Poisson, _) => Ok(0),
        (EncoderKind::Transform(_), Some(t)) => {
            let separable = t.dim() == encoder.block_spec().block_size;
            encoder_ops(
                encoder.image_shape(),
                encoder.block_spec(),
                separable,
                schedule,
            )
        }
        (EncoderKind::Transform(_), None) => Err(Error::InvalidState(
            "transform encoder without a matrix".into(),
        )),
    }
}

/// One LIF layer's row of an [`OpsReport`].
#[derive(Debug, Clone, PartialEq)]
pub struct LayerOps {
    pub name: String,
    pub ann_ops: u64,
    pub spike_rate: f64,
    pub snn_ops: f64,
}

impl LayerOps {
    pub fn new(name: impl Into<String>, ann_ops: u64, spike_rate: f64) -> Result<Self> {
        if !(spike_rate.is_finite() && spike_rate >= 0.0) {
            return Err(invalid(format!(
                "spike rate {spike_rate} is not a finite non-negative value"
            )));
        }
        Ok(LayerOps {
            name: name.into(),
            ann_ops,
            spike_rate,
            snn_ops: spike_rate * ann_ops as f64,
        })
    }
}

/// Per-layer operation counts plus encoder overhead.
#[derive(Debug, Clone, PartialEq)]
pub struct OpsReport {
    pub layers: Vec<LayerOps>,
    pub encoder_ops: u64,
    pub mac_pj: f64,
    pub add_pj: f64,
}

impl OpsReport {
    pub fn new(layers: Vec<LayerOps>, encoder_ops: u64) -> Self {
        OpsReport {
            layers,
            encoder_ops,
            mac_pj: MAC_PJ,
            add_pj: ADD_PJ,
        }
    }

    /// Report for the LIF layers of `arch` with the given per-layer rates.
    pub fn from_rates(arch: &Architecture, rates: &[f64], encoder_ops: u64) -> Result<Self> {
        let lif = arch.lif_layers();
        if rates.len() != lif.len() {
            return Err(invalid(format!(
                "{} rates for {} LIF layers",
                rates.len(),
                lif.len()
            )));
        }
        let layers = lif
            .iter()
            .zip(rates)
            .map(|(&l, &r)| {
                let spec = &arch.layers()[l];
                let kind = match spec {
                    LayerSpec::Conv { .. } => "conv",
                    _ => "linear",
                };
                LayerOps::new(format!("{kind}{l}"), ann_ops(spec, arch.in_shape(l))?, r)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(OpsReport::new(layers, encoder_ops))
    }

    pub fn total_ann_ops(&self) -> u64 {
        self.layers.iter().map(|l| l.ann_ops).sum()
    }

    pub fn total_snn_ops(&self) -> f64 {
        self.layers.iter().map(|l| l.snn_ops).sum()
    }

    /// ANN energy over SNN energy, the encoder's multiplies charged to the SNN.
    #[allow(clippy::neg_cmp_op_on_partial_ord)] // NaN counts as undefined
    pub fn alpha(&self) -> Result<f64> {
        let ann = self.total_ann_ops() as f64 * self.mac_pj;
        let snn = self.encoder_ops as f64 * self.mac_pj + self.total_snn_ops() * self.add_pj;
        if !(snn > 0.0) {
            return Err(Error::UndefinedRatio(
                "SNN energy is zero: no spikes and no encoder operations".into(),
            ));
        }
        Ok(ann / snn)
    }

    /// `layer,ann_ops,spike_rate,snn_ops` rows followed by the `encoder_ops`
    /// and `alpha` footers. An undefined ratio is written as `undefined`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("layer,ann_ops,spike_rate,snn_ops\n");
        for l in &self.layers {
            let _ = writeln!(s, "{},{},{},{}", l.name, l.ann_ops, l.spike_rate, l.snn_ops);
        }
        let _ = writeln!(s, "encoder_ops,{},,", self.encoder_ops);
        match self.alpha() {
            Ok(a) => {
                let _ = writeln!(s, "alpha,{a},,");
            }
            Err(_) => s.push_str("alpha,undefined,,\n"),
        }
        s
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<10} {:>14} {:>11} {:>16}",
            "layer", "ann_ops", "spike_rate", "snn_ops"
        );
        for l in &self.layers {
            let _ = writeln!(
                s,
                "{:<10} {:>14} {:>11.4} {:>16.1}",
                l.name, l.ann_ops, l.spike_rate, l.snn_ops
            );
        }
        let _ = writeln!(s, "encoder ops per image: {}", self.encoder_ops);
        let _ = writeln!(
            s,
            "energy per op: MAC {} pJ, add {} pJ (pooling, output layer and memory excluded)",
            self.mac_pj, self.add_pj
        );
        match self.alpha() {
            Ok(a) => {
                let _ = writeln!(s, "alpha (ANN/SNN energy): {a:.4}");
            }
            Err(e) => {
                let _ = writeln!(s, "alpha: {e}");
            }
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transforms::BlockSpec;
    use proptest::prelude::*;

    fn conv(c_in: usize, c_out: usize, kernel: usize, stride: usize, pad: usize) -> LayerSpec {
        LayerSpec::Conv {
            c_in,
            c_out,
            kernel,
            stride,
            pad,
        }
    }

    #[test]
    fn conv_count_by_hand() {
        assert_eq!(
            ann_ops(&conv(3, 64, 3, 1, 1), [3, 32, 32]).unwrap(),
            1_769_472
        );
    }

    #[test]
    fn linear_count() {
        let l = LayerSpec::Linear {
            n_in: 100,
            n_out: 10,
        };
        assert_eq!(ann_ops(&l, [100, 1, 1]).unwrap(), 1000);
    }

    #[test]
    fn pointwise_conv_matches_linear() {
        let c = ann_ops(&conv(7, 5, 1, 1, 0), [7, 1, 1]).unwrap();
        let l = ann_ops(&LayerSpec::Linear { n_in: 7, n_out: 5 }, [7, 1, 1]).unwrap();
        assert_eq!(c, l);
    }

    #[test]
    fn pool_and_dropout_free() {
        assert_eq!(
            ann_ops(&LayerSpec::AvgPool { window: 2 }, [4, 8, 8]).unwrap(),
            0
        );
        assert_eq!(
            ann_ops(&LayerSpec::Dropout { rate: 0.5 }, [4, 8, 8]).unwrap(),
            0
        );
    }

    #[test]
    fn mismatched_input_rejected() {
        assert!(ann_ops(&conv(3, 4, 3, 1, 1), [2, 8, 8]).is_err());
        assert!(ann_ops(&LayerSpec::Linear { n_in: 5, n_out: 2 }, [6, 1, 1]).is_err());
    }

    #[test]
    fn single_block_one_cycle() {
        let spec = BlockSpec::tiled(4).unwrap();
        let s = FrequencySchedule::full_cycles(4, 1).unwrap();
        assert_eq!(encoder_ops((1, 4, 4), &spec, true, &s).unwrap(), 384);
    }

    #[test]
    fn more_cycles_cost_nothing() {
        let spec = BlockSpec::tiled(4).unwrap();
        let one = FrequencySchedule::full_cycles(4, 1).unwrap();
        let two = FrequencySchedule::full_cycles(4, 2).unwrap();
        let a = encoder_ops((3, 32, 32), &spec, true, &one).unwrap();
        assert_eq!(a, encoder_ops((3, 32, 32), &spec, true, &two).unwrap());
        assert_eq!(a, 3 * 64 * 384);
    }

    #[test]
    fn curtailed_schedule_reconstructs_fewer_bases() {
        let spec = BlockSpec::tiled(4).unwrap();
        let s = FrequencySchedule::cyclic(4, 8, 24).unwrap();
        assert_eq!(
            encoder_ops((1, 4, 4), &spec, true, &s).unwrap(),
            128 + 16 * 8
        );
        assert_eq!(
            encoder_ops((1, 4, 4), &spec, false, &s).unwrap(),
            256 + 16 * 8
        );
    }

    #[test]
    fn unit_rate_alpha() {
        let r = OpsReport::new(vec![LayerOps::new("fc", 1000, 1.0).unwrap()], 0);
        assert_eq!(r.alpha().unwrap(), 4600.0 / 900.0);
    }

    #[test]
    fn break_even_rate() {
        let r = OpsReport::new(vec![LayerOps::new("fc", 1000, MAC_PJ / ADD_PJ).unwrap()], 0);
        assert!((r.alpha().unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn silent_network_without_encoder_is_undefined() {
        let r = OpsReport::new(vec![LayerOps::new("fc", 1000, 0.0).unwrap()], 0);
        assert!(matches!(r.alpha(), Err(Error::UndefinedRatio(_))));
        assert!(r.to_csv().ends_with("alpha,undefined,,\n"));
    }

    #[test]
    fn spike_rate_definition() {
        let arch = Architecture::parse([1, 1, 1], "linear:1:1,linear:1:2").unwrap();
        assert_eq!(spike_rates(&arch, &[48], 1).unwrap(), vec![48.0]);
        assert_eq!(spike_rates(&arch, &[0], 5).unwrap(), vec![0.0]);
        assert!(spike_rates(&arch, &[1, 2], 1).is_err());
        assert!(spike_rates(&arch, &[1], 0).is_err());
    }

    #[test]
    fn csv_layout() {
        let r = OpsReport::new(
            vec![
                LayerOps::new("conv0", 100, 0.5).unwrap(),
                LayerOps::new("linear2", 10, 2.0).unwrap(),
            ],
            4,
        );
        let csv = r.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "layer,ann_ops,spike_rate,snn_ops");
        assert_eq!(lines[1], "conv0,100,0.5,50");
        assert_eq!(lines[2], "linear2,10,2,20");
        assert_eq!(lines[3], "encoder_ops,4,,");
        let alpha = 110.0 * 4.6 / (4.0 * 4.6 + 70.0 * 0.9);
        assert_eq!(lines[4], format!("alpha,{alpha},,"));
    }

    #[test]
    fn report_rows_cover_lif_layers() {
        let arch = Architecture::preset("digits", [1, 28, 28], 10, 1).unwrap();
        let r = OpsReport::from_rates(&arch, &[1.0, 1.0, 1.0], 0).unwrap();
        let names: Vec<&str> = r.layers.iter().map(|l| l.name.as_str()).collect();
        assert_eq!(names, ["conv0", "conv2", "linear4"]);
        assert_eq!(r.layers[0].ann_ops, 9 * 8 * 28 * 28);
        assert_eq!(r.layers[1].ann_ops, 9 * 8 * 14 * 14 * 16);
        assert_eq!(r.layers[2].ann_ops, 784 * 64);
    }

    fn report(rates: &[f64], ann: &[u64], enc: u64) -> OpsReport {
        OpsReport::new(
            rates
                .iter()
                .zip(ann)
                .enumerate()
                .map(|(i, (&r, &a))| LayerOps::new(format!("l{i}"), a, r).unwrap())
                .collect(),
            enc,
        )
    }

    proptest! {
        #[test]
        fn alpha_monotone(
            rates in proptest::collection::vec(0.01f64..10.0, 1..4),
            ann_seed in 1u64..100_000,
            enc in 0u64..10_000,
            which in 0usize..4,
        ) {
            let ann: Vec<u64> = (0..rates.len() as u64).map(|i| ann_seed + 17 * i).collect();
            let which = which % rates.len();
            let base = report(&rates, &ann, enc).alpha().unwrap();

            let mut r2 = rates.clone();
            r2[which] *= 1.5;
            prop_assert!(report(&r2, &ann, enc).alpha().unwrap() < base);

            prop_assert!(report(&rates, &ann, enc + 1000).alpha().unwrap() < base);

            // SNN ops held fixed: a layer's rate would otherwise scale with it.
            let mut r3 = report(&rates, &ann, enc);
            r3.layers[which].ann_ops += 1000;
            prop_assert!(r3.alpha().unwrap() > base);
        }

        #[test]
        fn snn_ops_recompute_exactly(rate in 0.0f64..50.0, ops in 0u64..1u64 << 40) {
            let l = LayerOps::new("x", ops, rate).unwrap();
            prop_assert_eq!(l.snn_ops, l.spike_rate * l.ann_ops as f64);
            prop_assert!(l.snn_ops >= 0.0);
        }
    }
}
