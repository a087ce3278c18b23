//! Softmax and cross-entropy loss.

use crate::error::{Error, Result};

/// Numerically stable (max-shifted) softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Cross-entropy of a probability vector against a 0-based target class.
///
/// Returns the loss and its gradient with respect to the *logits* that
/// produced `probs` (`probs - onehot(target)`).
pub fn cross_entropy_from_probs(probs: &[f64], target: usize) -> Result<(f64, Vec<f64>)> {
    if target >= probs.len() {
        return Err(Error::OutOfRange(format!(
            "target class {target} outside {} classes",
            probs.len()
        )));
    }
    let loss = -probs[target].ln();
    let mut dlogits = probs.to_vec();
    dlogits[target] -= 1.0;
    Ok((loss, dlogits))
}

/// Stable softmax cross-entropy on raw logits.
pub fn softmax_cross_entropy(logits: &[f64], target: usize) -> Result<(f64, Vec<f64>)> {
    if logits.iter().any(|l| !l.is_finite()) {
        return Err(Error::InvalidConfig("non-finite logit".into()));
    }
    cross_entropy_from_probs(&softmax(logits), target)
}
