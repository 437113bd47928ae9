//! Load curves, labelled instances and experiment splits.

use std::collections::BTreeSet;

use chrono::{DateTime, Duration, Utc};

use crate::error::{Error, Result};

/// Binary appliance-presence label, `0` or `1`.
pub type Label = u8;

/// A fixed-interval univariate load curve.
///
/// Timestamps are implicit: sample `j` is taken at `start + j * interval_s`.
/// Missing readings are `None`; present readings are finite and `>= 0` W.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    start: DateTime<Utc>,
    interval_s: u32,
    values: Vec<Option<f64>>,
    source_id: String,
}

impl TimeSeries {
    pub fn new(
        start: DateTime<Utc>,
        interval_s: u32,
        values: Vec<Option<f64>>,
        source_id: impl Into<String>,
    ) -> Result<Self> {
        if interval_s == 0 {
            return Err(Error::validation("interval_s must be positive"));
        }
        if values.is_empty() {
            return Err(Error::validation("a time series needs at least one sample"));
        }
        if let Some(j) = values
            .iter()
            .position(|v| matches!(v, Some(x) if !x.is_finite() || *x < 0.0))
        {
            return Err(Error::validation(format!(
                "sample {j} is not a finite non-negative power reading: {:?}",
                values[j]
            )));
        }
        Ok(Self { start, interval_s, values, source_id: source_id.into() })
    }

    /// Builds a series with no missing readings.
    pub fn from_dense(
        start: DateTime<Utc>,
        interval_s: u32,
        values: Vec<f64>,
        source_id: impl Into<String>,
    ) -> Result<Self> {
        Self::new(start, interval_s, values.into_iter().map(Some).collect(), source_id)
    }

    /// Same start, interval and source, new samples.
    pub fn with_values(&self, values: Vec<Option<f64>>) -> Result<Self> {
        Self::new(self.start, self.interval_s, values, self.source_id.clone())
    }

    pub fn start(&self) -> DateTime<Utc> {
        self.start
    }

    pub fn interval_s(&self) -> u32 {
        self.interval_s
    }

    pub fn values(&self) -> &[Option<f64>] {
        &self.values
    }

    pub fn source_id(&self) -> &str {
        &self.source_id
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    /// Always false; kept for API symmetry with `len`.
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn timestamp(&self, j: usize) -> DateTime<Utc> {
        self.start + Duration::seconds(j as i64 * self.interval_s as i64)
    }

    pub fn missing_count(&self) -> usize {
        self.values.iter().filter(|v| v.is_none()).count()
    }

    pub fn has_missing(&self) -> bool {
        self.values.iter().any(Option::is_none)
    }

    /// The readings as plain numbers, or `None` if any is missing.
    pub fn dense(&self) -> Option<Vec<f64>> {
        self.values.iter().copied().collect()
    }

    /// Sub-series `[from, to)` with the matching start timestamp.
    pub fn slice(&self, from: usize, to: usize) -> Result<Self> {
        if from >= to || to > self.len() {
            return Err(Error::validation(format!(
                "slice [{from}, {to}) out of range for length {}",
                self.len()
            )));
        }
        Self::new(
            self.timestamp(from),
            self.interval_s,
            self.values[from..to].to_vec(),
            self.source_id.clone(),
        )
    }
}

/// A gap-free load-curve window with its appliance-presence label.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledInstance {
    series: TimeSeries,
    dense: Vec<f64>,
    label: Label,
    case_id: String,
}

impl LabeledInstance {
    pub fn new(series: TimeSeries, label: Label, case_id: impl Into<String>) -> Result<Self> {
        if label > 1 {
            return Err(Error::validation(format!("label must be 0 or 1, got {label}")));
        }
        let dense = series.dense().ok_or_else(|| {
            Error::validation(format!(
                "instance from {} at {} has {} missing values",
                series.source_id(),
                series.start(),
                series.missing_count()
            ))
        })?;
        Ok(Self { series, dense, label, case_id: case_id.into() })
    }

    pub fn series(&self) -> &TimeSeries {
        &self.series
    }

    pub fn values(&self) -> &[f64] {
        &self.dense
    }

    pub fn label(&self) -> Label {
        self.label
    }

    pub fn case_id(&self) -> &str {
        &self.case_id
    }

    pub fn source_id(&self) -> &str {
        self.series.source_id()
    }

    pub fn len(&self) -> usize {
        self.dense.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dense.is_empty()
    }

    /// Identifier unique within a dataset: house plus window start.
    pub fn id(&self) -> String {
        format!("{}@{}", self.source_id(), self.series.start().format("%Y-%m-%dT%H:%M:%SZ"))
    }
}

/// House-disjoint train / validation / test partition.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSplit {
    pub train: Vec<LabeledInstance>,
    pub validation: Vec<LabeledInstance>,
    pub test: Vec<LabeledInstance>,
    pub seed: u64,
}

impl ExperimentSplit {
    pub fn houses(instances: &[LabeledInstance]) -> BTreeSet<&str> {
        instances.iter().map(LabeledInstance::source_id).collect()
    }

    /// No household contributes to both train∪validation and test.
    pub fn is_house_disjoint(&self) -> bool {
        let test = Self::houses(&self.test);
        self.train
            .iter()
            .chain(&self.validation)
            .all(|i| !test.contains(i.source_id()))
    }

    /// Positive and negative training counts differ by at most one.
    pub fn is_train_balanced(&self) -> bool {
        let pos = self.train.iter().filter(|i| i.label() == 1).count();
        let neg = self.train.len() - pos;
        pos.abs_diff(neg) <= 1
    }

    /// Common instance length, if every instance agrees.
    pub fn series_len(&self) -> Option<usize> {
        let mut lens = self.train.iter().chain(&self.validation).chain(&self.test).map(|i| i.len());
        let first = lens.next()?;
        lens.all(|l| l == first).then_some(first)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;

    fn t0() -> DateTime<Utc> {
        Utc.with_ymd_and_hms(2014, 1, 1, 0, 0, 0).unwrap()
    }

    #[test]
    fn rejects_bad_readings() {
        assert!(TimeSeries::new(t0(), 60, vec![Some(-1.0)], "h").is_err());
        assert!(TimeSeries::new(t0(), 60, vec![Some(f64::NAN)], "h").is_err());
        assert!(TimeSeries::new(t0(), 0, vec![Some(1.0)], "h").is_err());
        assert!(TimeSeries::new(t0(), 60, vec![], "h").is_err());
        // a legitimate zero reading is not "missing"
        let s = TimeSeries::new(t0(), 60, vec![Some(0.0), None], "h").unwrap();
        assert_eq!(s.missing_count(), 1);
    }

    #[test]
    fn implicit_timestamps() {
        let s = TimeSeries::from_dense(t0(), 1800, vec![1.0; 3], "h").unwrap();
        assert_eq!(s.timestamp(2), Utc.with_ymd_and_hms(2014, 1, 1, 1, 0, 0).unwrap());
        let tail = s.slice(1, 3).unwrap();
        assert_eq!(tail.start(), s.timestamp(1));
    }

    #[test]
    fn instances_reject_missing_and_non_binary() {
        let gap = TimeSeries::new(t0(), 60, vec![Some(1.0), None], "h").unwrap();
        assert!(LabeledInstance::new(gap, 1, "kettle").is_err());
        let ok = TimeSeries::from_dense(t0(), 60, vec![1.0, 2.0], "h").unwrap();
        assert!(LabeledInstance::new(ok.clone(), 2, "kettle").is_err());
        let inst = LabeledInstance::new(ok, 1, "kettle").unwrap();
        assert_eq!(inst.values(), &[1.0, 2.0]);
        assert_eq!(inst.id(), "h@2014-01-01T00:00:00Z");
    }
}
