//! Nearest-neighbour classification.

use super::distance::{dtw_radius, squared_dtw, squared_euclid, DEFAULT_DTW_BAND};
use crate::classifier::{ClassifierKind, FittedClassifier, Model};
use crate::error::{Error, Result};
use crate::series::{Label, LabeledInstance};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Metric {
    Euclid,
    /// DTW with a Sakoe-Chiba band given as a fraction of the length.
    Dtw { band: Option<f64> },
}

impl Metric {
    pub fn dtw() -> Self {
        Metric::Dtw { band: Some(DEFAULT_DTW_BAND) }
    }
}

#[derive(Debug)]
struct KnnModel {
    metric: Metric,
    radius: usize,
    k: usize,
    series: Vec<Vec<f64>>,
    labels: Vec<Label>,
}

impl KnnModel {
    fn squared(&self, query: &[f64], train: &[f64], cutoff: f64) -> f64 {
        match self.metric {
            Metric::Euclid => squared_euclid(query, train, cutoff),
            Metric::Dtw { .. } => squared_dtw(query, train, self.radius, cutoff),
        }
    }

    /// Indices of the `k` nearest training series, nearest first; ties go to
    /// the smaller index.
    fn nearest(&self, query: &[f64]) -> Vec<usize> {
        let mut best: Vec<(f64, usize)> = Vec::with_capacity(self.k + 1);
        for (i, s) in self.series.iter().enumerate() {
            let cutoff = if best.len() == self.k { best[self.k - 1].0 } else { f64::INFINITY };
            let d = self.squared(query, s, cutoff);
            if best.len() < self.k || d < cutoff {
                let at = best.partition_point(|&(bd, _)| bd <= d);
                best.insert(at, (d, i));
                best.truncate(self.k);
            }
        }
        best.into_iter().map(|(_, i)| i).collect()
    }
}

impl Model for KnnModel {
    fn score(&self, values: &[f64]) -> f64 {
        let nn = self.nearest(values);
        nn.iter().filter(|&&i| self.labels[i] == 1).count() as f64 / nn.len() as f64
    }
}

/// Lazy k-NN over the training set; the score is the positive fraction of
/// the `k` nearest neighbours.
pub fn fit_knn(train: &[LabeledInstance], metric: Metric, k: usize, seed: u64) -> Result<FittedClassifier> {
    let first = train.first().ok_or_else(|| Error::validation("k-NN needs a non-empty training set"))?;
    if k == 0 || k > train.len() {
        return Err(Error::validation(format!("k must lie in 1..={}, got {k}", train.len())));
    }
    let len = first.len();
    if let Some(bad) = train.iter().find(|i| i.len() != len) {
        return Err(Error::dimension(len, bad.len()));
    }
    let radius = match metric {
        Metric::Euclid => 0,
        Metric::Dtw { band } => dtw_radius(len, band)?,
    };
    let kind = match metric {
        Metric::Euclid => ClassifierKind::KnnEuclid,
        Metric::Dtw { .. } => ClassifierKind::KnnDtw,
    };
    let model = KnnModel {
        metric,
        radius,
        k,
        series: train.iter().map(|i| i.values().to_vec()).collect(),
        labels: train.iter().map(LabeledInstance::label).collect(),
    };
    Ok(FittedClassifier::new(kind, seed, len, model))
}
