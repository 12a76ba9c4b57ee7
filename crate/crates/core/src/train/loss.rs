use crate::error::{invalid, Error, Result};

/// Cross-entropy of `softmax(potentials)` against a one-hot `label`.
/// Returns the loss and its gradient `z − y` with respect to the potentials.
pub fn softmax_loss(potentials: &[f64], label: usize) -> Result<(f64, Vec<f64>)> {
    if potentials.len() < 2 {
        return Err(invalid(format!(
            "softmax needs at least 2 classes, got {}",
            potentials.len()
        )));
    }
    if label >= potentials.len() {
        return Err(invalid(format!(
            "label {label} out of range for {} classes",
            potentials.len()
        )));
    }
    if potentials.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericFault("non-finite output potential".into()));
    }
    let max = potentials.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = potentials.iter().map(|v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    let loss = sum.ln() - (potentials[label] - max);
    let mut grad: Vec<f64> = exps.iter().map(|e| e / sum).collect();
    grad[label] -= 1.0;
    Ok((loss, grad))
}
