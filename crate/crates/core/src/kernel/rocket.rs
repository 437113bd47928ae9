//! Random convolutional kernels and the ROCKET transform.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::features::{ColumnKind, FeatureMatrix};
use crate::classifier::Deadline;
use crate::error::{Error, Result};
use crate::rng;

pub const KERNEL_LENGTHS: [usize; 3] = [7, 9, 11];
pub const ROCKET_MIN_LEN: usize = 8;

#[derive(Clone, Debug, PartialEq)]
pub struct RandomKernel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub dilation: usize,
    /// Zero padding of half the dilated span on both sides.
    pub padded: bool,
}

impl RandomKernel {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn span(&self) -> usize {
        (self.weights.len() - 1) * self.dilation
    }

    pub fn padding(&self) -> usize {
        if self.padded {
            self.span() / 2
        } else {
            0
        }
    }

    /// Number of convolution outputs on a series of length `t`, if any.
    pub fn output_len(&self, t: usize) -> Option<usize> {
        (t + 2 * self.padding()).checked_sub(self.span()).filter(|&n| n > 0)
    }

    /// Draws one kernel the ROCKET way for series of length `t`.
    pub fn sample(rng: &mut impl Rng, t: usize) -> Self {
        let len = KERNEL_LENGTHS[rng.random_range(0..KERNEL_LENGTHS.len())];
        let mut weights: Vec<f64> = (0..len).map(|_| StandardNormal.sample(rng)).collect();
        let mean = weights.iter().sum::<f64>() / len as f64;
        weights.iter_mut().for_each(|w| *w -= mean);
        let bias = rng.random_range(-1.0..1.0);
        let upper = ((t as f64 - 1.0) / (len as f64 - 1.0)).log2().max(0.0);
        let exponent = if upper > 0.0 { rng.random_range(0.0..upper) } else { 0.0 };
        let dilation = (2f64.powf(exponent) as usize).max(1);
        let padded = rng.random_range(0..2) == 1;
        let mut kernel = Self { weights, bias, dilation, padded };
        // Series shorter than the kernel only admit the padded form.
        if kernel.output_len(t).is_none() {
            kernel.padded = true;
        }
        kernel
    }
}

/// Convolution outputs of `kernel` on `x` passed to `sink` in order.
fn convolve(x: &[f64], k: &RandomKernel, mut sink: impl FnMut(f64)) {
    let t = x.len() as isize;
    let pad = k.padding() as isize;
    let d = k.dilation as isize;
    let span = k.span() as isize;
    let out_len = t + 2 * pad - span;
    // Output i reads x[i - pad + j d]; all taps are in range for i in [pad, t + pad - span).
    let lo = pad.min(out_len);
    let hi = (t + pad - span).max(lo);
    let edge = |i: isize| {
        let mut s = k.bias;
        for (j, &w) in k.weights.iter().enumerate() {
            let at = i - pad + j as isize * d;
            if (0..t).contains(&at) {
                s += w * x[at as usize];
            }
        }
        s
    };
    for i in 0..lo {
        sink(edge(i));
    }
    for i in lo..hi {
        let base = (i - pad) as usize;
        let mut s = k.bias;
        for (j, &w) in k.weights.iter().enumerate() {
            s += w * x[base + j * k.dilation];
        }
        sink(s);
    }
    for i in hi..out_len {
        sink(edge(i));
    }
}

/// Proportion of positive outputs and maximum output of one kernel.
pub fn apply_kernel(series: &[f64], kernel: &RandomKernel) -> Result<(f64, f64)> {
    if kernel.is_empty() || kernel.dilation == 0 {
        return Err(Error::validation("kernel needs weights and a positive dilation"));
    }
    let n = kernel.output_len(series.len()).ok_or_else(|| {
        Error::validation(format!(
            "kernel spanning {} samples does not fit a series of length {}",
            kernel.span() + 1,
            series.len()
        ))
    })?;
    Ok(ppv_max(series, kernel, n))
}

fn ppv_max(series: &[f64], kernel: &RandomKernel, n: usize) -> (f64, f64) {
    let mut positive = 0usize;
    let mut max = f64::NEG_INFINITY;
    convolve(series, kernel, |s| {
        positive += usize::from(s > 0.0);
        if s > max {
            max = s;
        }
    });
    (positive as f64 / n as f64, max)
}

/// `n` kernels, kernel `k` drawn from its own stream of `(seed, family)`.
pub fn sample_kernels(n: usize, t: usize, seed: u64, family: &str) -> Result<Vec<RandomKernel>> {
    if t < ROCKET_MIN_LEN {
        return Err(Error::validation(format!("ROCKET needs series of at least {ROCKET_MIN_LEN} samples, got {t}")));
    }
    Ok((0..n).map(|k| RandomKernel::sample(&mut rng::named_stream(seed, family, k as u64), t)).collect())
}

/// `[ppv_0, max_0, ppv_1, max_1, ...]` for one series.
pub fn rocket_features(series: &[f64], kernels: &[RandomKernel]) -> Vec<f64> {
    let mut out = Vec::with_capacity(2 * kernels.len());
    for k in kernels {
        let n = k.output_len(series.len()).expect("kernels were sampled for this length");
        let (ppv, max) = ppv_max(series, k, n);
        out.push(ppv);
        out.push(max);
    }
    out
}

/// ROCKET features of every series, rows in input order.
pub fn rocket_transform(series: &[&[f64]], kernels: &[RandomKernel], deadline: &Deadline) -> Result<FeatureMatrix> {
    let t = series.first().map_or(0, |s| s.len());
    if let Some(k) = kernels.iter().find(|k| k.output_len(t).is_none()) {
        return Err(Error::validation(format!("kernel of span {} does not fit length {t}", k.span() + 1)));
    }
    if let Some(bad) = series.iter().find(|s| s.len() != t) {
        return Err(Error::dimension(t, bad.len()));
    }
    let rows: Vec<Vec<f64>> = series
        .par_iter()
        .map(|s| {
            deadline.check()?;
            Ok(rocket_features(s, kernels))
        })
        .collect::<Result<_>>()?;
    let cols = 2 * kernels.len();
    let kinds = (0..cols).map(|c| if c % 2 == 0 { ColumnKind::Ppv } else { ColumnKind::Max }).collect();
    FeatureMatrix::new(series.len(), cols, rows.concat(), kinds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn naive(x: &[f64], k: &RandomKernel) -> Vec<f64> {
        let pad = k.padding() as isize;
        let n = k.output_len(x.len()).unwrap();
        (0..n)
            .map(|i| {
                let mut s = k.bias;
                for j in 0..k.len() {
                    let at = i as isize - pad + (j * k.dilation) as isize;
                    if at >= 0 && (at as usize) < x.len() {
                        s += k.weights[j] * x[at as usize];
                    }
                }
                s
            })
            .collect()
    }

    #[test]
    fn hand_convolution() {
        let k = RandomKernel { weights: vec![1.0, 1.0], bias: 0.0, dilation: 1, padded: false };
        assert_eq!(apply_kernel(&[1.0, -2.0, 1.0], &k).unwrap(), (0.0, -1.0));
        let z = RandomKernel { weights: vec![0.0; 3], bias: 1.0, dilation: 2, padded: true };
        assert_eq!(apply_kernel(&[5.0, -3.0, 2.0, 8.0], &z).unwrap(), (1.0, 1.0));
        let long = RandomKernel { weights: vec![1.0; 9], bias: 0.0, dilation: 1, padded: false };
        assert!(apply_kernel(&[1.0; 8], &long).is_err());
    }

    #[test]
    fn matches_nested_loop_oracle() {
        let mut r = rng::stream(4, 4);
        for t in [8, 9, 20, 48, 300] {
            let x: Vec<f64> = (0..t).map(|_| r.random_range(0.0..2500.0)).collect();
            for k in sample_kernels(200, t, t as u64, "test").unwrap() {
                let mut fast = Vec::new();
                convolve(&x, &k, |s| fast.push(s));
                let slow = naive(&x, &k);
                assert_eq!(fast.len(), slow.len());
                for (a, b) in fast.iter().zip(&slow) {
                    assert!((a - b).abs() <= 1e-12, "{a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn sampled_kernels_are_valid() {
        for t in [8, 10, 48, 1440] {
            for k in sample_kernels(500, t, 1, "rocket").unwrap() {
                assert!(KERNEL_LENGTHS.contains(&k.len()));
                assert!(k.weights.iter().sum::<f64>().abs() < 1e-12);
                assert!((-1.0..1.0).contains(&k.bias));
                assert!(k.dilation >= 1 && k.output_len(t).is_some());
            }
        }
        assert!(sample_kernels(1, 7, 1, "rocket").is_err());
    }

    #[test]
    fn transform_shape_and_determinism() {
        let mut r = rng::stream(2, 2);
        let data: Vec<Vec<f64>> = (0..5).map(|_| (0..48).map(|_| r.random_range(0.0..100.0)).collect()).collect();
        let refs: Vec<&[f64]> = data.iter().map(Vec::as_slice).collect();
        let kernels = sample_kernels(100, 48, 9, "rocket").unwrap();
        let a = rocket_transform(&refs, &kernels, &Deadline::none()).unwrap();
        let b = rocket_transform(&refs, &sample_kernels(100, 48, 9, "rocket").unwrap(), &Deadline::none()).unwrap();
        assert_eq!((a.rows(), a.cols()), (5, 200));
        assert_eq!(a, b);
        for r in 0..5 {
            for c in (0..200).step_by(2) {
                assert!((0.0..=1.0).contains(&a.get(r, c)));
            }
        }
    }

    proptest! {
        #[test]
        fn ppv_is_scale_invariant(seed in any::<u64>(), c in 0.01f64..100.0) {
            let mut r = rng::stream(seed, 0);
            let x: Vec<f64> = (0..40).map(|_| r.random_range(-5.0..5.0)).collect();
            let k = RandomKernel::sample(&mut r, 40);
            let scaled = RandomKernel {
                weights: k.weights.iter().map(|w| w * c).collect(),
                bias: k.bias * c,
                ..k.clone()
            };
            let mut a = Vec::new();
            let mut b = Vec::new();
            convolve(&x, &k, |s| a.push(s));
            convolve(&x, &scaled, |s| b.push(s));
            let mut near_zero = false;
            for (u, v) in a.iter().zip(&b) {
                if u.abs() < 1e-12 {
                    near_zero = true;
                } else {
                    prop_assert_eq!(*u > 0.0, *v > 0.0);
                }
            }
            if !near_zero {
                prop_assert_eq!(apply_kernel(&x, &k).unwrap().0, apply_kernel(&x, &scaled).unwrap().0);
            }
        }

        #[test]
        fn unpadded_outputs_are_translation_invariant(seed in any::<u64>(), c in -500.0f64..500.0) {
            let mut r = rng::stream(seed, 1);
            let x: Vec<f64> = (0..60).map(|_| r.random_range(0.0..100.0)).collect();
            let shifted: Vec<f64> = x.iter().map(|v| v + c).collect();
            let k = RandomKernel { padded: false, ..RandomKernel::sample(&mut r, 60) };
            let (p0, m0) = apply_kernel(&x, &k).unwrap();
            let (p1, m1) = apply_kernel(&shifted, &k).unwrap();
            prop_assert!((m0 - m1).abs() < 1e-9 * (1.0 + c.abs()));
            let mut near_zero = 0;
            convolve(&x, &k, |s| near_zero += usize::from(s.abs() < 1e-9));
            if near_zero == 0 {
                prop_assert_eq!(p0, p1);
            }
        }
    }
}
