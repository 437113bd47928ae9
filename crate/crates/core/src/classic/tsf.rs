//! Time Series Forest: trees over (mean, std, slope) of random intervals.

use rand::Rng;
use rayon::prelude::*;

use super::tree::DecisionTree;
use crate::classifier::{ClassifierKind, Deadline, FittedClassifier, Model};
use crate::error::{Error, Result};
use crate::rng;
use crate::series::{Label, LabeledInstance};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TsfParams {
    pub n_trees: usize,
    /// Intervals per tree; `None` means `floor(sqrt(T))`.
    pub intervals_per_tree: Option<usize>,
    pub min_interval: usize,
}

impl Default for TsfParams {
    fn default() -> Self {
        Self { n_trees: 200, intervals_per_tree: None, min_interval: 3 }
    }
}

/// Mean, population standard deviation and least-squares slope of
/// `series[start..end]`.
pub fn tsf_interval_features(series: &[f64], start: usize, end: usize) -> Result<(f64, f64, f64)> {
    if start >= end || end > series.len() {
        return Err(Error::validation(format!("empty or out-of-range interval [{start}, {end})")));
    }
    let x = &series[start..end];
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    if x.len() == 1 {
        return Ok((mean, 0.0, 0.0));
    }
    let t_mean = (n - 1.0) / 2.0;
    let (mut var, mut sxy, mut sxx) = (0.0, 0.0, 0.0);
    for (i, &v) in x.iter().enumerate() {
        let dv = v - mean;
        let dt = i as f64 - t_mean;
        var += dv * dv;
        sxy += dt * dv;
        sxx += dt * dt;
    }
    Ok((mean, (var / n).sqrt(), sxy / sxx))
}

#[derive(Debug)]
struct TsfTree {
    intervals: Vec<(usize, usize)>,
    tree: DecisionTree,
}

fn features(intervals: &[(usize, usize)], values: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(3 * intervals.len());
    for &(s, e) in intervals {
        let (m, sd, sl) = tsf_interval_features(values, s, e).expect("interval within fitted length");
        out.extend([m, sd, sl]);
    }
    out
}

#[derive(Debug)]
struct TsfModel {
    trees: Vec<TsfTree>,
}

impl Model for TsfModel {
    fn score(&self, values: &[f64]) -> f64 {
        let votes = self.trees.iter().filter(|t| t.tree.predict(&features(&t.intervals, values)) == 1).count();
        votes as f64 / self.trees.len() as f64
    }

    fn members(&self) -> usize {
        self.trees.len()
    }
}

pub(crate) fn check_train(train: &[LabeledInstance], min_len: usize) -> Result<usize> {
    let first = train.first().ok_or_else(|| Error::validation("empty training set"))?;
    let len = first.len();
    if let Some(bad) = train.iter().find(|i| i.len() != len) {
        return Err(Error::dimension(len, bad.len()));
    }
    if len < min_len {
        return Err(Error::validation(format!("series length {len} is below the minimum of {min_len}")));
    }
    Ok(len)
}

pub fn fit_tsf(train: &[LabeledInstance], params: &TsfParams, seed: u64, deadline: &Deadline) -> Result<FittedClassifier> {
    let len = check_train(train, params.min_interval.max(3))?;
    if params.n_trees == 0 {
        return Err(Error::validation("TSF needs at least one tree"));
    }
    let r = params.intervals_per_tree.unwrap_or(((len as f64).sqrt().floor() as usize).max(1));
    let labels: Vec<Label> = train.iter().map(LabeledInstance::label).collect();
    let trees = (0..params.n_trees)
        .into_par_iter()
        .map(|t| {
            deadline.check()?;
            let mut rng = rng::named_stream(seed, "tsf-tree", t as u64);
            let intervals: Vec<(usize, usize)> = (0..r)
                .map(|_| {
                    let width = rng.random_range(params.min_interval..=len);
                    let start = rng.random_range(0..=len - width);
                    (start, start + width)
                })
                .collect();
            let rows: Vec<Vec<f64>> = train.iter().map(|i| features(&intervals, i.values())).collect();
            Ok(TsfTree { tree: DecisionTree::fit(&rows, &labels), intervals })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FittedClassifier::new(ClassifierKind::Tsf, seed, len, TsfModel { trees }))
}
