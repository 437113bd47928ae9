//! Run records, their JSON-lines persistence and per-group summaries.

use std::collections::BTreeMap;
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::DataSizeMode;
use crate::classifier::ClassifierKind;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Ok,
    Timeout,
    Error,
}

/// Outcome of one (classifier, interval, fraction, seed) run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunRecord {
    pub run_id: String,
    pub config_digest: String,
    /// `benchmark`, `frequency` or `datasize`.
    pub experiment: String,
    pub dataset: String,
    pub classifier: ClassifierKind,
    pub case_id: String,
    pub interval_s: u32,
    pub seed: u64,
    pub data_size_mode: String,
    pub fraction: f64,
    pub status: RunStatus,
    pub macro_f1: Option<f64>,
    pub f1_pos: Option<f64>,
    pub f1_neg: Option<f64>,
    pub ib_ratio: Option<f64>,
    pub n_train: usize,
    pub n_test: usize,
    pub train_time_s: f64,
    pub infer_time_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

fn unit(name: &str, v: Option<f64>) -> std::result::Result<(), String> {
    match v {
        Some(x) if (0.0..=1.0).contains(&x) => Ok(()),
        Some(x) => Err(format!("{name} = {x} is outside [0, 1]")),
        None => Err(format!("status ok but {name} is missing")),
    }
}

impl RunRecord {
    pub fn is_ok(&self) -> bool {
        self.status == RunStatus::Ok
    }

    pub fn validate(&self) -> std::result::Result<(), String> {
        if self.config_digest.len() != 64 || !self.config_digest.bytes().all(|b| b.is_ascii_hexdigit()) {
            return Err(format!("config digest '{}' is not a SHA-256 hex string", self.config_digest));
        }
        if self.data_size_mode.parse::<DataSizeMode>().is_err() {
            return Err(format!("unknown data size mode '{}'", self.data_size_mode));
        }
        if !(self.fraction > 0.0 && self.fraction <= 1.0) {
            return Err(format!("fraction {} is outside (0, 1]", self.fraction));
        }
        if self.is_ok() {
            unit("macro_f1", self.macro_f1)?;
            unit("f1_pos", self.f1_pos)?;
            unit("f1_neg", self.f1_neg)?;
            unit("ib_ratio", self.ib_ratio)?;
        } else if self.macro_f1.is_some() {
            return Err("only ok runs carry metrics".into());
        }
        Ok(())
    }
}

/// Appends records to `path`, one JSON object per line.
pub fn write_results(records: &[RunRecord], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let mut text = String::new();
    for r in records {
        text.push_str(&serde_json::to_string(r).map_err(|e| Error::Runtime(e.to_string()))?);
        text.push('\n');
    }
    OpenOptions::new().create(true).append(true).open(path)?.write_all(text.as_bytes())?;
    Ok(())
}

fn parse_file(path: &Path) -> Result<Vec<RunRecord>> {
    let text = fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: RunRecord = serde_json::from_str(line)
            .map_err(|e| Error::parse(i + 1, format!("{}: {e}", path.display())))?;
        record.validate().map_err(|m| Error::parse(i + 1, format!("{}: {m}", path.display())))?;
        out.push(record);
    }
    Ok(out)
}

/// `*` and `?` wildcards over a single file name.
fn wildcard(pattern: &[u8], name: &[u8]) -> bool {
    match (pattern.first(), name.first()) {
        (None, None) => true,
        (Some(b'*'), _) => wildcard(&pattern[1..], name) || (!name.is_empty() && wildcard(pattern, &name[1..])),
        (Some(b'?'), Some(_)) => wildcard(&pattern[1..], &name[1..]),
        (Some(p), Some(n)) if p == n => wildcard(&pattern[1..], &name[1..]),
        _ => false,
    }
}

fn sorted_matches(dir: &Path, keep: impl Fn(&str) -> bool) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.file_name().and_then(|n| n.to_str()).is_some_and(&keep))
        .collect();
    files.sort();
    Ok(files)
}

/// Reads records from a file, from every `*.jsonl` file of a directory, or
/// from the files matching a wildcard in the last path component.
pub fn read_results(path: impl AsRef<Path>) -> Result<Vec<RunRecord>> {
    let path = path.as_ref();
    let files = if path.is_dir() {
        sorted_matches(path, |n| n.ends_with(".jsonl"))?
    } else if path.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.contains(['*', '?'])) {
        let pattern = path.file_name().and_then(|n| n.to_str()).unwrap_or_default().as_bytes().to_vec();
        let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
        sorted_matches(dir, |n| wildcard(&pattern, n.as_bytes()))?
    } else {
        vec![path.to_path_buf()]
    };
    if files.is_empty() {
        return Err(Error::validation(format!("no result files match {}", path.display())));
    }
    let mut out = Vec::new();
    for f in files {
        out.extend(parse_file(&f)?);
    }
    Ok(out)
}

/// Records that share everything but the seed.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct GroupKey {
    pub experiment: String,
    pub dataset: String,
    pub case_id: String,
    pub interval_s: u32,
    pub data_size_mode: String,
    /// `f64::to_bits` of the fraction, which orders positive values.
    fraction_bits: u64,
    pub classifier: ClassifierKind,
}

impl GroupKey {
    pub fn of(r: &RunRecord) -> Self {
        GroupKey {
            experiment: r.experiment.clone(),
            dataset: r.dataset.clone(),
            case_id: r.case_id.clone(),
            interval_s: r.interval_s,
            data_size_mode: r.data_size_mode.clone(),
            fraction_bits: r.fraction.to_bits(),
            classifier: r.classifier,
        }
    }

    pub fn fraction(&self) -> f64 {
        f64::from_bits(self.fraction_bits)
    }
}

/// Macro F1 statistics of one group over its ok runs.
#[derive(Clone, Debug, PartialEq)]
pub struct Summary {
    pub key: GroupKey,
    pub n_ok: usize,
    pub n_timeout: usize,
    pub n_error: usize,
    pub mean: Option<f64>,
    /// Population standard deviation.
    pub std: Option<f64>,
    pub min: Option<f64>,
    pub max: Option<f64>,
}

pub fn summarize(records: &[RunRecord]) -> Vec<Summary> {
    let mut groups: BTreeMap<GroupKey, Vec<&RunRecord>> = BTreeMap::new();
    for r in records {
        groups.entry(GroupKey::of(r)).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|(key, rs)| {
            let count = |s: RunStatus| rs.iter().filter(|r| r.status == s).count();
            let f1: Vec<f64> = rs.iter().filter(|r| r.is_ok()).filter_map(|r| r.macro_f1).collect();
            let n = f1.len() as f64;
            let mean = (!f1.is_empty()).then(|| f1.iter().sum::<f64>() / n);
            let std = mean.map(|m| (f1.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n).sqrt());
            Summary {
                key,
                n_ok: f1.len(),
                n_timeout: count(RunStatus::Timeout),
                n_error: count(RunStatus::Error),
                mean,
                std,
                min: f1.iter().copied().reduce(f64::min),
                max: f1.iter().copied().reduce(f64::max),
            }
        })
        .collect()
}
