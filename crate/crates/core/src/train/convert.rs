use crate::encoder::SpikeTrain;
use crate::error::{invalid, Error, Result};
use crate::snn::{Network, SnnModel};
use crate::stats::StreamingPercentile;

/// Per-layer firing thresholds for the ANN weights in `net`.
///
/// Layers are fixed first to last. Layer `k`'s threshold is the nearest-rank
/// `percentile` of its weighted input pooled over every neuron, timestep and
/// calibration input, with the thresholds of layers `< k` already in place.
pub fn balance_thresholds(
    net: &Network,
    calibration: &[SpikeTrain],
    percentile: f64,
    leak: f32,
) -> Result<Vec<f32>> {
    if calibration.is_empty() {
        return Err(invalid("empty calibration set"));
    }
    let lif = net.arch.lif_layers();
    let mut thresholds = vec![1.0f32; lif.len()];
    for (k, &layer) in lif.iter().enumerate() {
        let model = SnnModel::new(net.clone(), thresholds.clone(), leak)?;
        let total: usize = calibration
            .iter()
            .map(|s| s.timesteps * net.arch.out_len(layer))
            .sum();
        let mut pct = StreamingPercentile::new(total, percentile)?;
        let mut fault = None;
        for train in calibration {
            model.probe_preactivations(train, k, &mut |v| {
                if let Err(e) = pct.extend(v) {
                    fault.get_or_insert(e);
                }
            })?;
        }
        if let Some(e) = fault {
            return Err(e);
        }
        let v = pct.finish()?;
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::NumericFault(format!(
                "layer {layer}: {percentile} percentile of pre-activations is {v}, no positive threshold"
            )));
        }
        thresholds[k] = v;
    }
    Ok(thresholds)
}
