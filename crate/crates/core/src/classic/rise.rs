//! Random Interval Spectral Ensemble: one interval per tree, spectral and
//! autocorrelation features.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::tree::DecisionTree;
use super::tsf::check_train;
use crate::classifier::{ClassifierKind, Deadline, FittedClassifier, Model};
use crate::error::{Error, Result};
use crate::rng;
use crate::series::{Label, LabeledInstance};

pub const RISE_MIN_INTERVAL: usize = 16;
pub const RISE_MAX_LAG: usize = 100;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RiseParams {
    pub n_trees: usize,
}

impl Default for RiseParams {
    fn default() -> Self {
        Self { n_trees: 500 }
    }
}

/// Complex DFT of `x` (unnormalized, `X_k = sum x_t e^{-2 pi i k t / n}`).
pub fn dft(x: &[f64]) -> Vec<Complex64> {
    let fft = FftPlanner::new().plan_fft_forward(x.len());
    run_fft(&*fft, x)
}

fn run_fft(fft: &dyn Fft<f64>, x: &[f64]) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft.process(&mut buf);
    buf
}

/// Pearson correlation between `x[..n-lag]` and `x[lag..]`; zero when either
/// side is constant.
pub fn acf(x: &[f64], lag: usize) -> f64 {
    let n = x.len() - lag;
    let (a, b) = (&x[..n], &x[lag..]);
    let constant = |s: &[f64]| s.iter().all(|&v| v == s[0]);
    if constant(a) || constant(b) {
        return 0.0;
    }
    let ma = a.iter().sum::<f64>() / n as f64;
    let mb = b.iter().sum::<f64>() / n as f64;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (&u, &v) in a.iter().zip(b) {
        let (du, dv) = (u - ma, v - mb);
        sab += du * dv;
        saa += du * du;
        sbb += dv * dv;
    }
    sab / (saa * sbb).sqrt()
}

fn features_with(fft: &dyn Fft<f64>, x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let lags = RISE_MAX_LAG.min(n / 4);
    let spectrum = run_fft(fft, x);
    let mut out = Vec::with_capacity(n / 2 + lags);
    out.extend(spectrum[..n / 2].iter().map(|c| c.norm_sqr()));
    out.extend((1..=lags).map(|lag| acf(x, lag)));
    out
}

/// Power spectrum (first `len / 2` bins) followed by the autocorrelation at
/// lags `1..=min(100, len / 4)`.
pub fn rise_interval_features(series: &[f64], start: usize, end: usize) -> Result<Vec<f64>> {
    if end > series.len() || end < start + RISE_MIN_INTERVAL {
        return Err(Error::validation(format!(
            "RISE intervals need at least {RISE_MIN_INTERVAL} samples within the series, got [{start}, {end})"
        )));
    }
    let fft = FftPlanner::new().plan_fft_forward(end - start);
    Ok(features_with(&*fft, &series[start..end]))
}

struct RiseTree {
    start: usize,
    end: usize,
    fft: Arc<dyn Fft<f64>>,
    tree: DecisionTree,
}

impl fmt::Debug for RiseTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RiseTree").field("start", &self.start).field("end", &self.end).finish()
    }
}

#[derive(Debug)]
struct RiseModel {
    trees: Vec<RiseTree>,
}

impl Model for RiseModel {
    fn score(&self, values: &[f64]) -> f64 {
        let votes = self
            .trees
            .iter()
            .filter(|t| t.tree.predict(&features_with(&*t.fft, &values[t.start..t.end])) == 1)
            .count();
        votes as f64 / self.trees.len() as f64
    }

    fn members(&self) -> usize {
        self.trees.len()
    }
}

/// Tree 0 sees the whole series; the others a random power-of-two interval.
fn draw_interval(len: usize, tree: usize, seed: u64) -> (usize, usize) {
    if tree == 0 {
        return (0, len);
    }
    let mut rng = rng::named_stream(seed, "rise-interval", tree as u64);
    let max_pow = len.ilog2();
    let width = 1usize << rng.random_range(RISE_MIN_INTERVAL.ilog2()..=max_pow);
    let start = rng.random_range(0..=len - width);
    (start, start + width)
}

pub fn fit_rise(train: &[LabeledInstance], params: &RiseParams, seed: u64, deadline: &Deadline) -> Result<FittedClassifier> {
    let len = check_train(train, RISE_MIN_INTERVAL)?;
    if params.n_trees == 0 {
        return Err(Error::validation("RISE needs at least one tree"));
    }
    let intervals: Vec<(usize, usize)> = (0..params.n_trees).map(|t| draw_interval(len, t, seed)).collect();
    let mut planner = FftPlanner::new();
    let plans: BTreeMap<usize, Arc<dyn Fft<f64>>> =
        intervals.iter().map(|&(s, e)| (e - s, planner.plan_fft_forward(e - s))).collect();
    let labels: Vec<Label> = train.iter().map(LabeledInstance::label).collect();
    let trees = intervals
        .into_par_iter()
        .map(|(start, end)| {
            deadline.check()?;
            let fft = Arc::clone(&plans[&(end - start)]);
            let rows: Vec<Vec<f64>> = train.iter().map(|i| features_with(&*fft, &i.values()[start..end])).collect();
            Ok(RiseTree { start, end, fft, tree: DecisionTree::fit(&rows, &labels) })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FittedClassifier::new(ClassifierKind::Rise, seed, len, RiseModel { trees }))
}
