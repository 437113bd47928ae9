//! Mini-batch Adam training with early stopping on validation Macro F1.

use rand::seq::SliceRandom;

use super::layers::{Layer, Sequential};
use super::loss::{softmax, softmax_ce};
use super::tensor::Tensor3;
use crate::classifier::{label_of, Deadline};
use crate::error::{Error, Result};
use crate::eval::macro_f1;
use crate::rng::Rng;
use crate::series::Label;

#[derive(Clone, Debug, PartialEq)]
pub struct TrainParams {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without a validation improvement before stopping.
    pub patience: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for TrainParams {
    fn default() -> Self {
        Self { learning_rate: 1e-3, batch_size: 32, max_epochs: 100, patience: 10, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

impl TrainParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) || self.batch_size < 2 || self.max_epochs == 0 || self.patience == 0 {
            return Err(Error::validation(
                "training needs a positive learning rate, batch size of at least 2, and positive epochs and patience",
            ));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || !(self.eps > 0.0) {
            return Err(Error::validation("Adam moments must lie in [0, 1) with a positive epsilon"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainReport {
    pub epochs_run: usize,
    /// 1-based epoch whose parameters were kept.
    pub best_epoch: usize,
    pub best_val_f1: f64,
    pub final_val_f1: f64,
    pub epoch_losses: Vec<f64>,
}

/// Zero mean, unit variance; (near-)constant series map to zeros.
pub fn znorm(x: &[f64]) -> Vec<f64> {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let std = (x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    if std <= 1e-8 * mean.abs().max(1.0) {
        return vec![0.0; x.len()];
    }
    x.iter().map(|v| (v - mean) / std).collect()
}

pub(crate) fn batch_tensor(xs: &[Vec<f64>], idx: &[usize]) -> Tensor3 {
    let t = xs[idx[0]].len();
    let data = idx.iter().flat_map(|&i| xs[i].iter().copied()).collect();
    Tensor3::from_vec(idx.len(), 1, t, data).expect("non-empty batch of equal-length series")
}

/// Positive-class probabilities of already normalized series.
pub fn predict_proba(net: &Sequential, xs: &[Vec<f64>], chunk: usize) -> Result<Vec<f64>> {
    let idx: Vec<usize> = (0..xs.len()).collect();
    let mut out = Vec::with_capacity(xs.len());
    for c in idx.chunks(chunk.max(1)) {
        let logits = net.infer(&batch_tensor(xs, c))?;
        out.extend((0..c.len()).map(|i| softmax(logits.item(i))[1]));
    }
    Ok(out)
}

/// Batches of `size`; a trailing batch of one joins the previous batch so
/// batch normalization always sees at least two items.
pub(crate) fn batches(order: &[usize], size: usize) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = order.chunks(size).map(<[usize]>::to_vec).collect();
    if out.len() > 1 && out.last().is_some_and(|b| b.len() == 1) {
        let last = out.pop().unwrap();
        out.last_mut().unwrap().extend(last);
    }
    out
}

pub(crate) fn adam_step(net: &mut Sequential, p: &TrainParams, step: i32) {
    let c1 = 1.0 - p.beta1.powi(step);
    let c2 = 1.0 - p.beta2.powi(step);
    for param in net.params() {
        for i in 0..param.value.len() {
            let g = param.grad[i];
            param.m[i] = p.beta1 * param.m[i] + (1.0 - p.beta1) * g;
            param.v[i] = p.beta2 * param.v[i] + (1.0 - p.beta2) * g * g;
            let m_hat = param.m[i] / c1;
            let v_hat = param.v[i] / c2;
            param.value[i] -= p.learning_rate * m_hat / (v_hat.sqrt() + p.eps);
        }
        param.zero_grad();
    }
}

fn snapshot(net: &Sequential) -> Vec<Vec<f64>> {
    net.buffers().into_iter().map(<[f64]>::to_vec).collect()
}

fn restore(net: &mut Sequential, saved: &[Vec<f64>]) {
    for (dst, src) in net.buffers_mut().into_iter().zip(saved) {
        dst.copy_from_slice(src);
    }
}

/// Trains `net` on normalized series and keeps the parameters of the epoch
/// with the best validation Macro F1 (earliest on ties). A perfect
/// validation score ends training at once: no later epoch could replace it.
#[allow(clippy::too_many_arguments)]
pub fn train_network(
    net: &mut Sequential,
    train_x: &[Vec<f64>],
    train_y: &[Label],
    val_x: &[Vec<f64>],
    val_y: &[Label],
    params: &TrainParams,
    rng: &mut Rng,
    deadline: &Deadline,
) -> Result<TrainReport> {
    params.validate()?;
    if train_x.len() < 2 || train_x.len() != train_y.len() {
        return Err(Error::validation("training needs at least two labelled series"));
    }
    if val_x.is_empty() || val_x.len() != val_y.len() {
        return Err(Error::validation("training needs a non-empty labelled validation set"));
    }
    let mut order: Vec<usize> = (0..train_x.len()).collect();
    let mut step = 0;
    let mut best: Option<(f64, usize, Vec<Vec<f64>>)> = None;
    let mut epoch_losses = Vec::new();
    let mut final_val_f1 = 0.0;
    for epoch in 1..=params.max_epochs {
        order.shuffle(rng);
        let mut total = 0.0;
        for b in batches(&order, params.batch_size) {
            deadline.check()?;
            let logits = net.forward(&batch_tensor(train_x, &b))?;
            let labels: Vec<Label> = b.iter().map(|&i| train_y[i]).collect();
            let (loss, grad) = softmax_ce(&logits, &labels)?;
            net.backward(&grad);
            step += 1;
            adam_step(net, params, step);
            total += loss * b.len() as f64;
        }
        epoch_losses.push(total / train_x.len() as f64);
        let pred: Vec<Label> = predict_proba(net, val_x, params.batch_size)?.into_iter().map(label_of).collect();
        final_val_f1 = macro_f1(val_y, &pred)?;
        if best.as_ref().is_none_or(|(f, _, _)| final_val_f1 > *f) {
            best = Some((final_val_f1, epoch, snapshot(net)));
        }
        let (best_f1, best_epoch) = best.as_ref().map_or((0.0, epoch), |b| (b.0, b.1));
        if best_f1 >= 1.0 || epoch - best_epoch >= params.patience {
            break;
        }
    }
    let (best_val_f1, best_epoch, saved) = best.expect("at least one epoch");
    restore(net, &saved);
    net.clear();
    Ok(TrainReport { epochs_run: epoch_losses.len(), best_epoch, best_val_f1, final_val_f1, epoch_losses })
}
