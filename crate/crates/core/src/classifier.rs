//! The uniform classifier contract.
//!
//! Every trained model is wrapped in a [`FittedClassifier`]: a kind tag, the
//! fit seed, the series length it was trained on and an immutable scoring
//! function. Labels are always derived from scores with a fixed threshold of
//! 0.5, ties going to the positive class.

use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::{Label, LabeledInstance, TimeSeries};

pub const DECISION_THRESHOLD: f64 = 0.5;

/// Maps a score in `[0, 1]` to a label; `0.5` maps to `1`.
pub fn label_of(score: f64) -> Label {
    Label::from(score >= DECISION_THRESHOLD)
}

/// A trained, immutable scoring function over fixed-length series.
pub trait Model: Send + Sync + fmt::Debug {
    /// Positive-class score in `[0, 1]`. `values` has the fitted length.
    fn score(&self, values: &[f64]) -> f64;

    /// Number of ensemble members (trees, kernels sets, networks).
    fn members(&self) -> usize {
        1
    }

    /// Flat binary encoding for models that support persistence.
    fn encode(&self) -> Option<Vec<u8>> {
        None
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClassifierKind {
    KnnEuclid,
    KnnDtw,
    Tsf,
    Rise,
    Boss,
    BossEnsemble,
    CBoss,
    Rocket,
    MiniRocket,
    Arsenal,
    ConvNet,
    ResNet,
    InceptionTime,
}

impl ClassifierKind {
    pub const ALL: [ClassifierKind; 13] = [
        ClassifierKind::KnnEuclid,
        ClassifierKind::KnnDtw,
        ClassifierKind::Tsf,
        ClassifierKind::Rise,
        ClassifierKind::Boss,
        ClassifierKind::BossEnsemble,
        ClassifierKind::CBoss,
        ClassifierKind::Rocket,
        ClassifierKind::MiniRocket,
        ClassifierKind::Arsenal,
        ClassifierKind::ConvNet,
        ClassifierKind::ResNet,
        ClassifierKind::InceptionTime,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ClassifierKind::KnnEuclid => "knn-euclid",
            ClassifierKind::KnnDtw => "knn-dtw",
            ClassifierKind::Tsf => "tsf",
            ClassifierKind::Rise => "rise",
            ClassifierKind::Boss => "boss",
            ClassifierKind::BossEnsemble => "boss-ensemble",
            ClassifierKind::CBoss => "cboss",
            ClassifierKind::Rocket => "rocket",
            ClassifierKind::MiniRocket => "minirocket",
            ClassifierKind::Arsenal => "arsenal",
            ClassifierKind::ConvNet => "convnet",
            ClassifierKind::ResNet => "resnet",
            ClassifierKind::InceptionTime => "inceptiontime",
        }
    }

    fn tag(self) -> u8 {
        Self::ALL.iter().position(|k| *k == self).unwrap() as u8
    }

    fn from_tag(tag: u8) -> Option<Self> {
        Self::ALL.get(tag as usize).copied()
    }

    pub fn is_neural(self) -> bool {
        matches!(self, ClassifierKind::ConvNet | ClassifierKind::ResNet | ClassifierKind::InceptionTime)
    }
}

impl fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ClassifierKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('_', "-");
        Self::ALL
            .iter()
            .copied()
            .find(|k| k.name() == key)
            .ok_or_else(|| Error::validation(format!("unknown classifier '{s}'")))
    }
}

/// Cooperative wall-clock budget checked inside long fitting loops.
#[derive(Clone, Copy, Debug, Default)]
pub struct Deadline {
    at: Option<(Instant, f64)>,
}

impl Deadline {
    pub fn none() -> Self {
        Self { at: None }
    }

    pub fn after_secs(budget_s: f64) -> Self {
        Self { at: Some((Instant::now() + Duration::from_secs_f64(budget_s.max(0.0)), budget_s)) }
    }

    pub fn check(&self) -> Result<()> {
        match self.at {
            Some((at, budget_s)) if Instant::now() >= at => Err(Error::Timeout { budget_s }),
            _ => Ok(()),
        }
    }
}

/// An opaque trained classifier with the uniform predict contract.
#[derive(Clone)]
pub struct FittedClassifier {
    kind: ClassifierKind,
    fit_seed: u64,
    series_len: usize,
    model: Arc<dyn Model>,
}

impl fmt::Debug for FittedClassifier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FittedClassifier")
            .field("kind", &self.kind)
            .field("fit_seed", &self.fit_seed)
            .field("series_len", &self.series_len)
            .field("members", &self.model.members())
            .finish()
    }
}

impl FittedClassifier {
    pub fn new(kind: ClassifierKind, fit_seed: u64, series_len: usize, model: impl Model + 'static) -> Self {
        Self { kind, fit_seed, series_len, model: Arc::new(model) }
    }

    pub fn kind(&self) -> ClassifierKind {
        self.kind
    }

    pub fn fit_seed(&self) -> u64 {
        self.fit_seed
    }

    pub fn series_len(&self) -> usize {
        self.series_len
    }

    pub fn members(&self) -> usize {
        self.model.members()
    }

    pub fn model(&self) -> &dyn Model {
        self.model.as_ref()
    }

    pub fn predict(&self, series: &TimeSeries) -> Result<Label> {
        self.predict_score(series).map(label_of)
    }

    pub fn predict_score(&self, series: &TimeSeries) -> Result<f64> {
        if series.len() != self.series_len {
            return Err(Error::dimension(self.series_len, series.len()));
        }
        let values = series.dense().ok_or_else(|| {
            Error::validation(format!("series has {} missing values", series.missing_count()))
        })?;
        Ok(self.model.score(&values))
    }

    /// Score for an already gap-free window.
    pub fn score_values(&self, values: &[f64]) -> Result<f64> {
        if values.len() != self.series_len {
            return Err(Error::dimension(self.series_len, values.len()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::validation("series contains non-finite values"));
        }
        Ok(self.model.score(values))
    }

    pub fn predict_values(&self, values: &[f64]) -> Result<Label> {
        self.score_values(values).map(label_of)
    }

    /// Scores for many instances, in input order.
    pub fn score_batch(&self, instances: &[LabeledInstance]) -> Result<Vec<f64>> {
        instances.par_iter().map(|i| self.score_values(i.values())).collect()
    }

    pub fn predict_batch(&self, instances: &[LabeledInstance]) -> Result<Vec<Label>> {
        Ok(self.score_batch(instances)?.into_iter().map(label_of).collect())
    }

    pub fn is_persistable(&self) -> bool {
        matches!(
            self.kind,
            ClassifierKind::Rocket
                | ClassifierKind::MiniRocket
                | ClassifierKind::Arsenal
                | ClassifierKind::ConvNet
                | ClassifierKind::ResNet
                | ClassifierKind::InceptionTime
        )
    }

    /// Flat binary record: `"ADCL"`, version u32, kind u8, fit seed u64,
    /// series length u64, payload length u64, then the model payload.
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let payload = self
            .model
            .encode()
            .ok_or_else(|| Error::validation(format!("{} models cannot be persisted", self.kind)))?;
        let mut out = Vec::with_capacity(payload.len() + 33);
        out.extend_from_slice(b"ADCL");
        out.extend_from_slice(&1u32.to_le_bytes());
        out.push(self.kind.tag());
        out.extend_from_slice(&self.fit_seed.to_le_bytes());
        out.extend_from_slice(&(self.series_len as u64).to_le_bytes());
        out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
        out.extend_from_slice(&payload);
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = crate::kernel::persist::Reader::new(bytes);
        if r.take(4)? != b"ADCL" {
            return Err(Error::validation("not a classifier record (bad magic)"));
        }
        let version = r.u32()?;
        if version != 1 {
            return Err(Error::validation(format!("unsupported record version {version}")));
        }
        let kind = ClassifierKind::from_tag(r.u8()?)
            .ok_or_else(|| Error::validation("unknown classifier tag"))?;
        let fit_seed = r.u64()?;
        let series_len = r.u64()? as usize;
        let len = r.u64()? as usize;
        let payload = r.take(len)?;
        r.finish()?;
        let model: Arc<dyn Model> = match kind {
            ClassifierKind::Rocket | ClassifierKind::MiniRocket | ClassifierKind::Arsenal => {
                crate::kernel::persist::decode(payload, series_len)?
            }
            ClassifierKind::ConvNet | ClassifierKind::ResNet | ClassifierKind::InceptionTime => {
                crate::neural::checkpoint::decode(payload, series_len)?
            }
            other => return Err(Error::validation(format!("{other} models cannot be persisted"))),
        };
        Ok(Self { kind, fit_seed, series_len, model })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_bytes()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}
