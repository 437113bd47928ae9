use super::tensor::Tensor3;
use crate::error::{Error, Result};
use crate::series::Label;

/// Numerically stable softmax of one logit vector.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exp: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let total: f64 = exp.iter().sum();
    exp.into_iter().map(|e| e / total).collect()
}

/// Mean cross-entropy of `(batch, classes, 1)` logits and its gradient
/// `(softmax - onehot) / batch`.
pub fn softmax_ce(logits: &Tensor3, labels: &[Label]) -> Result<(f64, Tensor3)> {
    let (b, c, t) = logits.shape();
    if t != 1 || b != labels.len() {
        return Err(Error::dimension(labels.len(), b * t));
    }
    if logits.data().iter().any(|v| !v.is_finite()) {
        return Err(Error::validation("non-finite logits"));
    }
    let mut grad = Tensor3::zeros(b, c, 1);
    let mut loss = 0.0;
    for (i, &y) in labels.iter().enumerate() {
        let z = logits.item(i);
        let y = y as usize;
        if y >= c {
            return Err(Error::validation(format!("label {y} out of range for {c} classes")));
        }
        let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + z.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        loss += lse - z[y];
        for (k, g) in grad.item_mut(i).iter_mut().enumerate() {
            *g = ((z[k] - lse).exp() - f64::from(u8::from(k == y))) / b as f64;
        }
    }
    Ok((loss / b as f64, grad))
}
