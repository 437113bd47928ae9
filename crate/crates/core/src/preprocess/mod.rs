//! From household records to fixed-length, labeled, house-split instances.
//!
//! Day labels are computed on the base grid of the appliance channels before
//! any resampling, so every sampling rate of the same day carries the same
//! label.

mod split;
mod transform;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use chrono::{DateTime, Utc};
use rayon::prelude::*;

pub use self::split::{
    assign_houses, balance_train, by_house, imbalance_ratio, partition_instances, split_instances, HouseAssignment,
    SplitScheme, UnbalancedSplit,
};
pub use self::transform::{assign_label, day_windows, interpolate_gaps, resample, slice_days, DaySlice, DAY_S};

use crate::dataio::csv::{read_aggregate_csv, write_aggregate_csv};
use crate::dataio::HouseholdRecord;
use crate::error::{Error, Result};
use crate::series::{ExperimentSplit, Label, LabeledInstance, TimeSeries};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SliceMode {
    /// One instance per complete UTC day.
    Day,
    /// One instance per household covering its whole record.
    FullSeries,
}

impl std::str::FromStr for SliceMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "day" => Ok(SliceMode::Day),
            "full-series" | "full" => Ok(SliceMode::FullSeries),
            other => Err(Error::validation(format!("unknown slice mode '{other}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PreprocessConfig {
    pub target_interval_s: u32,
    pub max_gap_s: u64,
    pub slice: SliceMode,
    pub on_threshold_w: f64,
    pub on_min_samples: usize,
    pub split: SplitScheme,
    pub seed: u64,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            target_interval_s: 1800,
            max_gap_s: 3600,
            slice: SliceMode::Day,
            on_threshold_w: 15.0,
            on_min_samples: 2,
            split: SplitScheme::default(),
            seed: 1,
        }
    }
}

impl PreprocessConfig {
    pub fn validate(&self) -> Result<()> {
        if self.target_interval_s == 0 {
            return Err(Error::validation("target interval must be positive"));
        }
        if self.max_gap_s < u64::from(self.target_interval_s) {
            return Err(Error::validation(format!(
                "max_gap_s ({}) must be at least the target interval ({})",
                self.max_gap_s, self.target_interval_s
            )));
        }
        if !self.on_threshold_w.is_finite() || self.on_min_samples == 0 {
            return Err(Error::validation("ON threshold must be finite and ON run length positive"));
        }
        Ok(())
    }

    fn manifest_pairs(&self) -> Vec<(&'static str, String)> {
        let slice = match self.slice {
            SliceMode::Day => "day",
            SliceMode::FullSeries => "full-series",
        };
        let mut pairs = vec![
            ("target_interval_s", self.target_interval_s.to_string()),
            ("max_gap_s", self.max_gap_s.to_string()),
            ("slice", slice.to_string()),
            ("on_threshold_w", self.on_threshold_w.to_string()),
            ("on_min_samples", self.on_min_samples.to_string()),
            ("seed", self.seed.to_string()),
        ];
        match self.split {
            SplitScheme::ByHouse { train, validation, test } => {
                pairs.push(("split", "by-house".into()));
                pairs.push(("split_train", train.to_string()));
                pairs.push(("split_validation", validation.to_string()));
                pairs.push(("split_test", test.to_string()));
            }
            SplitScheme::NilmHoldout { holdout_houses, validation_fraction } => {
                pairs.push(("split", "nilm-holdout".into()));
                pairs.push(("holdout_houses", holdout_houses.to_string()));
                pairs.push(("validation_fraction", validation_fraction.to_string()));
            }
        }
        pairs
    }
}

/// Labels of one house's days for a case, keyed by day start.
///
/// Channel labels come from the base-grid appliance channel; days with a
/// missing appliance reading get no label. Survey labels apply to every day.
fn day_labels(record: &HouseholdRecord, case_id: &str, cfg: &PreprocessConfig) -> Result<Option<DayLabels>> {
    if let Some(ch) = record.channel(case_id) {
        let per_day = (DAY_S / ch.interval_s()) as usize;
        let mut labels = BTreeMap::new();
        for (first, start) in day_windows(ch)? {
            let day = ch.slice(first, first + per_day)?;
            if let Some(values) = day.dense() {
                labels.insert(start, assign_label(&values, cfg.on_threshold_w, cfg.on_min_samples));
            }
        }
        return Ok(Some(DayLabels::PerDay(labels)));
    }
    Ok(record.survey_label(case_id).map(DayLabels::Constant))
}

enum DayLabels {
    PerDay(BTreeMap<DateTime<Utc>, Label>),
    Constant(Label),
}

impl DayLabels {
    fn get(&self, start: DateTime<Utc>) -> Option<Label> {
        match self {
            DayLabels::PerDay(m) => m.get(&start).copied(),
            DayLabels::Constant(l) => Some(*l),
        }
    }
}

/// Resamples the aggregate to the target rate and fills short gaps.
pub fn prepare_aggregate(record: &HouseholdRecord, cfg: &PreprocessConfig) -> Result<TimeSeries> {
    let agg = resample(record.aggregate(), cfg.target_interval_s)?;
    Ok(interpolate_gaps(&agg, cfg.max_gap_s))
}

fn house_instances(record: &HouseholdRecord, case_id: &str, cfg: &PreprocessConfig) -> Result<Vec<LabeledInstance>> {
    let Some(labels) = day_labels(record, case_id, cfg)? else {
        return Ok(Vec::new());
    };
    let agg = prepare_aggregate(record, cfg)?;
    match cfg.slice {
        SliceMode::Day => {
            let per_day = (DAY_S / cfg.target_interval_s) as usize;
            let mut out = Vec::new();
            for (first, start) in day_windows(&agg)? {
                let day = agg.slice(first, first + per_day)?;
                if day.has_missing() {
                    continue;
                }
                if let Some(label) = labels.get(start) {
                    out.push(LabeledInstance::new(day, label, case_id)?);
                }
            }
            Ok(out)
        }
        SliceMode::FullSeries => {
            let label = match &labels {
                DayLabels::Constant(l) => *l,
                DayLabels::PerDay(m) => u8::from(m.values().any(|&l| l == 1)),
            };
            if agg.has_missing() {
                log::warn!("household {} dropped: missing readings remain after gap filling", record.source_id());
                return Ok(Vec::new());
            }
            Ok(vec![LabeledInstance::new(agg, label, case_id)?])
        }
    }
}

/// Turns records into labeled instances for `case_id`, in record order.
///
/// Households without ground truth for the case contribute nothing.
pub fn build_instances(
    records: &[HouseholdRecord],
    case_id: &str,
    cfg: &PreprocessConfig,
) -> Result<Vec<LabeledInstance>> {
    cfg.validate()?;
    if !records.iter().any(|r| r.appliances().contains(&case_id)) {
        return Err(Error::validation(format!("unknown case '{case_id}': no household has ground truth for it")));
    }
    let per_house: Vec<Vec<LabeledInstance>> =
        records.par_iter().map(|r| house_instances(r, case_id, cfg)).collect::<Result<_>>()?;
    let instances: Vec<LabeledInstance> = per_house.into_iter().flatten().collect();
    if let Some(first) = instances.first() {
        if let Some(other) = instances.iter().find(|i| i.len() != first.len()) {
            return Err(Error::validation(format!(
                "instances differ in length ({} vs {} from {}); use day slicing",
                first.len(),
                other.len(),
                other.source_id()
            )));
        }
    }
    Ok(instances)
}

/// Full pipeline: instances, house split, balanced train set.
pub fn preprocess(records: &[HouseholdRecord], case_id: &str, cfg: &PreprocessConfig) -> Result<ExperimentSplit> {
    let instances = build_instances(records, case_id, cfg)?;
    split_instances(&instances, cfg.split, cfg.seed)
}

const MANIFEST_FILE: &str = "manifest.txt";
const LABELS_FILE: &str = "labels.csv";
const PARTS: [&str; 3] = ["train", "validation", "test"];

/// Persists a split: one `timestamp,aggregate` file per house and part, a
/// `labels.csv` index of instances and a `manifest.txt` of the settings.
pub fn write_split(dir: impl AsRef<Path>, split: &ExperimentSplit, case_id: &str, cfg: &PreprocessConfig) -> Result<()> {
    let dir = dir.as_ref();
    let series_len = split.series_len().ok_or_else(|| Error::validation("cannot persist an empty split"))?;
    let mut labels = String::from("part,source_id,start,label\n");
    for (part, instances) in PARTS.iter().zip([&split.train, &split.validation, &split.test]) {
        let part_dir = dir.join(part);
        fs::create_dir_all(&part_dir)?;
        let mut sorted: Vec<&LabeledInstance> = instances.iter().collect();
        sorted.sort_by(|a, b| (a.source_id(), a.series().start()).cmp(&(b.source_id(), b.series().start())));
        for inst in &sorted {
            let _ = writeln!(
                labels,
                "{part},{},{},{}",
                inst.source_id(),
                inst.series().start().format("%Y-%m-%dT%H:%M:%SZ"),
                inst.label()
            );
        }
        for (house, group) in by_house(instances) {
            let mut group = group;
            group.sort_by_key(|i| i.series().start());
            write_aggregate_csv(&concat(&group)?, &part_dir.join(format!("{house}.csv")))?;
        }
    }
    fs::write(dir.join(LABELS_FILE), labels)?;

    let mut manifest = String::new();
    let _ = writeln!(manifest, "case_id = {case_id}");
    let _ = writeln!(manifest, "series_len = {series_len}");
    for (k, v) in cfg.manifest_pairs() {
        let _ = writeln!(manifest, "{k} = {v}");
    }
    let _ = writeln!(manifest, "n_train = {}", split.train.len());
    let _ = writeln!(manifest, "n_validation = {}", split.validation.len());
    let _ = writeln!(manifest, "n_test = {}", split.test.len());
    fs::write(dir.join(MANIFEST_FILE), manifest)?;
    Ok(())
}

/// Joins instances of one house onto a single grid; uncovered samples stay missing.
fn concat(group: &[&LabeledInstance]) -> Result<TimeSeries> {
    let first = group[0].series();
    let step = i64::from(first.interval_s());
    let last = group[group.len() - 1].series();
    let end = (last.start() - first.start()).num_seconds() / step + last.len() as i64;
    let mut values = vec![None; end as usize];
    for inst in group {
        let at = ((inst.series().start() - first.start()).num_seconds() / step) as usize;
        for (j, v) in inst.values().iter().enumerate() {
            values[at + j] = Some(*v);
        }
    }
    TimeSeries::new(first.start(), first.interval_s(), values, first.source_id())
}

/// Parses a `key = value` manifest.
pub fn read_manifest(path: impl AsRef<Path>) -> Result<BTreeMap<String, String>> {
    let text = fs::read_to_string(path)?;
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::parse(i + 1, format!("expected 'key = value', found '{line}'")))?;
        out.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(out)
}

/// Reads a split written by [`write_split`].
pub fn read_split(dir: impl AsRef<Path>) -> Result<ExperimentSplit> {
    let dir = dir.as_ref();
    let manifest = read_manifest(dir.join(MANIFEST_FILE))?;
    let get = |k: &str| manifest.get(k).ok_or_else(|| Error::validation(format!("manifest lacks '{k}'")));
    let case_id = get("case_id")?.clone();
    let series_len: usize = get("series_len")?.parse().map_err(|_| Error::validation("bad series_len"))?;
    let seed: u64 = get("seed")?.parse().map_err(|_| Error::validation("bad seed"))?;

    let text = fs::read_to_string(dir.join(LABELS_FILE))?;
    let mut houses: BTreeMap<(String, String), TimeSeries> = BTreeMap::new();
    let mut parts: [Vec<LabeledInstance>; 3] = Default::default();
    for (i, line) in text.lines().enumerate().skip(1) {
        let line_no = i + 1;
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 4 {
            return Err(Error::parse(line_no, "expected 'part,source_id,start,label'"));
        }
        let slot = PARTS
            .iter()
            .position(|p| *p == f[0])
            .ok_or_else(|| Error::parse(line_no, format!("unknown part '{}'", f[0])))?;
        let start: DateTime<Utc> =
            f[2].parse().map_err(|e| Error::parse(line_no, format!("bad timestamp '{}': {e}", f[2])))?;
        let label: Label = f[3].parse().map_err(|_| Error::parse(line_no, format!("bad label '{}'", f[3])))?;
        let key = (f[0].to_string(), f[1].to_string());
        if !houses.contains_key(&key) {
            let series = read_aggregate_csv(&dir.join(f[0]).join(format!("{}.csv", f[1])))?;
            houses.insert(key.clone(), series);
        }
        let series = &houses[&key];
        let offset = (start - series.start()).num_seconds();
        let step = i64::from(series.interval_s());
        if offset < 0 || offset % step != 0 {
            return Err(Error::parse(line_no, format!("instance start {start} is off the series grid")));
        }
        let at = (offset / step) as usize;
        let slice = series.slice(at, at + series_len).map_err(|e| Error::parse(line_no, e.to_string()))?;
        parts[slot].push(LabeledInstance::new(slice, label, case_id.clone())?);
    }
    let [train, validation, test] = parts;
    Ok(ExperimentSplit { train, validation, test, seed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::{generate_synthetic, ApplianceModel, SynthConfig};

    fn synth(n_houses: usize, days: usize, seed: u64) -> Vec<HouseholdRecord> {
        let cfg = SynthConfig {
            n_houses,
            days_per_house: days,
            appliances: vec![ApplianceModel::rectangular("kettle", 2000.0, 3600)],
            seed,
            ..SynthConfig::default()
        };
        generate_synthetic(&cfg).unwrap()
    }

    #[test]
    fn labels_match_the_retained_channel() {
        let records = synth(6, 3, 4);
        for interval in [60, 600, 1800] {
            let cfg = PreprocessConfig { target_interval_s: interval, ..PreprocessConfig::default() };
            let instances = build_instances(&records, "kettle", &cfg).unwrap();
            assert_eq!(instances.len(), 18);
            for inst in &instances {
                let record = records.iter().find(|r| r.source_id() == inst.source_id()).unwrap();
                let ch = record.channel("kettle").unwrap();
                let at = ((inst.series().start() - ch.start()).num_seconds() / 60) as usize;
                let day = ch.slice(at, at + 1440).unwrap().dense().unwrap();
                assert_eq!(inst.label(), assign_label(&day, 15.0, 2));
                assert_eq!(inst.len(), (DAY_S / interval) as usize);
            }
        }
    }

    #[test]
    fn labels_do_not_depend_on_rate() {
        let records = synth(8, 2, 5);
        let at = |interval| {
            let cfg = PreprocessConfig { target_interval_s: interval, ..PreprocessConfig::default() };
            build_instances(&records, "kettle", &cfg)
                .unwrap()
                .iter()
                .map(|i| (i.id(), i.label()))
                .collect::<Vec<_>>()
        };
        assert_eq!(at(60), at(1800));
    }

    #[test]
    fn unknown_case_is_rejected() {
        let records = synth(4, 1, 1);
        assert!(build_instances(&records, "sauna", &PreprocessConfig::default()).is_err());
    }

    #[test]
    fn bad_configs() {
        let cfg = PreprocessConfig { max_gap_s: 600, ..PreprocessConfig::default() };
        assert!(cfg.validate().is_err());
        let records = synth(4, 1, 1);
        let cfg = PreprocessConfig { target_interval_s: 90, max_gap_s: 3600, ..PreprocessConfig::default() };
        assert!(build_instances(&records, "kettle", &cfg).is_err());
    }

    #[test]
    fn split_round_trips_through_disk() {
        let records = synth(10, 3, 2);
        let cfg = PreprocessConfig { seed: 7, ..PreprocessConfig::default() };
        let split = preprocess(&records, "kettle", &cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_split(dir.path(), &split, "kettle", &cfg).unwrap();
        let back = read_split(dir.path()).unwrap();
        let key = |v: &[LabeledInstance]| {
            let mut k: Vec<_> = v.iter().map(|i| (i.id(), i.label(), i.values().to_vec())).collect();
            k.sort_by(|a, b| a.0.cmp(&b.0));
            k
        };
        assert_eq!(key(&back.train), key(&split.train));
        assert_eq!(key(&back.validation), key(&split.validation));
        assert_eq!(key(&back.test), key(&split.test));
        assert_eq!(back.seed, 7);
        let manifest = read_manifest(dir.path().join(MANIFEST_FILE)).unwrap();
        assert_eq!(manifest["case_id"], "kettle");
        assert_eq!(manifest["series_len"], "48");
    }
}
