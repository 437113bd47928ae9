//! MiniRocket: a fixed bank of 84 length-9 kernels over log-spaced
//! dilations, with biases taken from quantiles of training convolutions.

use rand::Rng;
use rayon::prelude::*;

use super::features::{ColumnKind, FeatureMatrix};
use crate::classifier::Deadline;
use crate::error::{Error, Result};
use crate::rng;

pub const MINIROCKET_KERNEL_LEN: usize = 9;
pub const MINIROCKET_KERNELS: usize = 84;
pub const MINIROCKET_MIN_LEN: usize = 10;

/// Positions of the three `2` weights of each kernel, in lexicographic order.
pub fn kernel_indices() -> Vec<[usize; 3]> {
    let mut out = Vec::with_capacity(MINIROCKET_KERNELS);
    for a in 0..MINIROCKET_KERNEL_LEN {
        for b in a + 1..MINIROCKET_KERNEL_LEN {
            for c in b + 1..MINIROCKET_KERNEL_LEN {
                out.push([a, b, c]);
            }
        }
    }
    out
}

/// Weights of kernel `k`: `-1` everywhere except three `2`s.
pub fn kernel_weights(k: usize) -> [f64; MINIROCKET_KERNEL_LEN] {
    let mut w = [-1.0; MINIROCKET_KERNEL_LEN];
    for i in kernel_indices()[k] {
        w[i] = 2.0;
    }
    w
}

/// `frac(i * golden ratio)` for `i = 1..=n`.
pub fn golden_quantiles(n: usize) -> Vec<f64> {
    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    (1..=n).map(|i| (i as f64 * phi).fract()).collect()
}

/// Linear-interpolation quantile of unsorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Dilations and features per dilation for a series length.
pub fn fit_dilations(t: usize, num_features: usize, max_dilations: usize) -> (Vec<usize>, Vec<usize>) {
    let per_kernel = (num_features / MINIROCKET_KERNELS).max(1);
    let true_max = per_kernel.min(max_dilations).max(1);
    let multiplier = per_kernel as f64 / true_max as f64;
    let max_exponent = ((t as f64 - 1.0) / (MINIROCKET_KERNEL_LEN as f64 - 1.0)).log2().max(0.0);
    let mut dilations: Vec<usize> = Vec::new();
    let mut counts: Vec<usize> = Vec::new();
    for i in 0..true_max {
        let e = if true_max > 1 { max_exponent * i as f64 / (true_max - 1) as f64 } else { 0.0 };
        let d = 2f64.powf(e) as usize;
        match dilations.last() {
            Some(&last) if last == d => *counts.last_mut().unwrap() += 1,
            _ => {
                dilations.push(d);
                counts.push(1);
            }
        }
    }
    let mut per_dilation: Vec<usize> = counts.iter().map(|&c| (c as f64 * multiplier) as usize).collect();
    let mut remainder = per_kernel - per_dilation.iter().sum::<usize>();
    let mut i = 0;
    while remainder > 0 {
        per_dilation[i] += 1;
        remainder -= 1;
        i = (i + 1) % per_dilation.len();
    }
    (dilations, per_dilation)
}

/// Fitted dilations and biases.
#[derive(Clone, Debug, PartialEq)]
pub struct MiniRocketParams {
    pub series_len: usize,
    pub dilations: Vec<usize>,
    pub features_per_dilation: Vec<usize>,
    pub biases: Vec<f64>,
}

impl MiniRocketParams {
    pub fn n_features(&self) -> usize {
        self.biases.len()
    }
}

/// Shifted copies `x[t + (j - 4) d]` (zero outside) summed with weight `-1`
/// (`alpha`) and the nine `3x` shifts (`gamma`).
struct Shifts {
    alpha: Vec<f64>,
    gamma: Vec<Vec<f64>>,
}

fn shifts(x: &[f64], d: usize) -> Shifts {
    let t = x.len();
    let mut alpha = vec![0.0; t];
    let mut gamma = vec![vec![0.0; t]; MINIROCKET_KERNEL_LEN];
    for (j, g) in gamma.iter_mut().enumerate() {
        let offset = (j as isize - 4) * d as isize;
        for i in 0..t {
            let at = i as isize + offset;
            if (0..t as isize).contains(&at) {
                let v = x[at as usize];
                alpha[i] -= v;
                g[i] = 3.0 * v;
            }
        }
    }
    Shifts { alpha, gamma }
}

fn kernel_output(s: &Shifts, idx: [usize; 3], out: &mut [f64]) {
    let [a, b, c] = idx;
    for (i, o) in out.iter_mut().enumerate() {
        *o = s.alpha[i] + s.gamma[a][i] + s.gamma[b][i] + s.gamma[c][i];
    }
}

/// Convolution of `x` with kernel `k` at dilation `d`, zero padded to the
/// input length.
pub fn minirocket_convolution(x: &[f64], k: usize, d: usize) -> Vec<f64> {
    let mut out = vec![0.0; x.len()];
    kernel_output(&shifts(x, d), kernel_indices()[k], &mut out);
    out
}

/// Fits dilations and biases; each (dilation, kernel) pair takes its biases
/// from one randomly chosen training series.
pub fn fit_minirocket(
    train: &[&[f64]],
    num_features: usize,
    max_dilations: usize,
    seed: u64,
) -> Result<MiniRocketParams> {
    let t = train.first().map_or(0, |s| s.len());
    if train.is_empty() || t < MINIROCKET_MIN_LEN {
        return Err(Error::validation(format!(
            "MiniRocket needs a non-empty training set of series with at least {MINIROCKET_MIN_LEN} samples"
        )));
    }
    if let Some(bad) = train.iter().find(|s| s.len() != t) {
        return Err(Error::dimension(t, bad.len()));
    }
    let (dilations, features_per_dilation) = fit_dilations(t, num_features, max_dilations);
    let total: usize = features_per_dilation.iter().sum::<usize>() * MINIROCKET_KERNELS;
    let quantiles = golden_quantiles(total);
    let indices = kernel_indices();
    let mut rng = rng::named_stream(seed, "minirocket-bias", 0);
    let picks: Vec<usize> = (0..dilations.len() * MINIROCKET_KERNELS).map(|_| rng.random_range(0..train.len())).collect();

    let mut biases = Vec::with_capacity(total);
    let mut out = vec![0.0; t];
    let mut at = 0;
    for (di, (&d, &nf)) in dilations.iter().zip(&features_per_dilation).enumerate() {
        let mut cache: Option<(usize, Shifts)> = None;
        for (k, &idx) in indices.iter().enumerate() {
            let example = picks[di * MINIROCKET_KERNELS + k];
            if cache.as_ref().is_none_or(|(e, _)| *e != example) {
                cache = Some((example, shifts(train[example], d)));
            }
            kernel_output(&cache.as_ref().unwrap().1, idx, &mut out);
            out.sort_by(f64::total_cmp);
            biases.extend(quantiles[at..at + nf].iter().map(|&q| quantile(&out, q)));
            at += nf;
        }
    }
    Ok(MiniRocketParams { series_len: t, dilations, features_per_dilation, biases })
}

/// PPV features of one series, ordered by dilation, kernel, bias.
pub fn minirocket_features(x: &[f64], p: &MiniRocketParams) -> Vec<f64> {
    let t = x.len();
    let indices = kernel_indices();
    let mut features = Vec::with_capacity(p.biases.len());
    let mut out = vec![0.0; t];
    let mut at = 0;
    for (di, (&d, &nf)) in p.dilations.iter().zip(&p.features_per_dilation).enumerate() {
        let s = shifts(x, d);
        let padding = (MINIROCKET_KERNEL_LEN - 1) * d / 2;
        for (k, &idx) in indices.iter().enumerate() {
            kernel_output(&s, idx, &mut out);
            // Alternate between the full output and the unpadded part.
            let region = if (di + k) % 2 == 0 { &out[..] } else { &out[padding..t - padding] };
            for &b in &p.biases[at..at + nf] {
                let positive = region.iter().filter(|&&v| v > b).count();
                features.push(positive as f64 / region.len() as f64);
            }
            at += nf;
        }
    }
    features
}

pub fn minirocket_transform(series: &[&[f64]], p: &MiniRocketParams, deadline: &Deadline) -> Result<FeatureMatrix> {
    if let Some(bad) = series.iter().find(|s| s.len() != p.series_len) {
        return Err(Error::dimension(p.series_len, bad.len()));
    }
    let rows: Vec<Vec<f64>> = series
        .par_iter()
        .map(|s| {
            deadline.check()?;
            Ok(minirocket_features(s, p))
        })
        .collect::<Result<_>>()?;
    FeatureMatrix::new(series.len(), p.n_features(), rows.concat(), vec![ColumnKind::Ppv; p.n_features()])
}
