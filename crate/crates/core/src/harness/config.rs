//! Experiment configuration files.
//!
//! The format is plain text: `[section]` headers followed by `key = value`
//! lines. Blank lines and lines starting with `#` or `;` are ignored. Lists
//! are comma-separated; seeds also accept an inclusive range `a..b`.
//!
//! ```text
//! [dataset]
//! path = data/refit
//! schema = nilm
//! case = kettle
//!
//! [experiment]
//! classifiers = rocket, convnet
//! intervals = 1800
//! seeds = 1..5
//! budget_s = 600
//!
//! [classifier.rocket]
//! kernels = 2000
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use chrono::{DateTime, Utc};
use sha2::{Digest, Sha256};

use super::registry::ClassifierParams;
use crate::classifier::ClassifierKind;
use crate::dataio::{ApplianceModel, BackgroundModel, SchemaKind, Signature, SynthConfig};
use crate::error::{Error, Result};
use crate::neural::TrainParams;
use crate::preprocess::{PreprocessConfig, SplitScheme, DAY_S};

/// Parsed `[section]` / `key = value` text, sections and keys sorted.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Ini {
    sections: BTreeMap<String, BTreeMap<String, String>>,
}

impl Ini {
    pub fn parse(text: &str) -> Result<Self> {
        let mut ini = Ini::default();
        let mut current: Option<String> = None;
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .map(|n| n.trim().to_ascii_lowercase())
                    .filter(|n| !n.is_empty())
                    .ok_or_else(|| Error::parse(line_no, format!("malformed section header '{line}'")))?;
                ini.sections.entry(name.clone()).or_default();
                current = Some(name);
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::parse(line_no, format!("expected 'key = value', found '{line}'")));
            };
            let Some(section) = &current else {
                return Err(Error::parse(line_no, "key outside of any [section]"));
            };
            let key = key.trim().to_ascii_lowercase();
            if key.is_empty() {
                return Err(Error::parse(line_no, "empty key"));
            }
            let map = ini.sections.get_mut(section).expect("section was inserted");
            if map.insert(key.clone(), value.trim().to_string()).is_some() {
                return Err(Error::parse(line_no, format!("duplicate key '{key}' in [{section}]")));
            }
        }
        Ok(ini)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn get(&self, section: &str, key: &str) -> Option<&str> {
        self.sections.get(section).and_then(|s| s.get(key)).map(String::as_str)
    }

    pub fn set(&mut self, section: &str, key: &str, value: impl Into<String>) {
        self.sections.entry(section.to_ascii_lowercase()).or_default().insert(key.to_ascii_lowercase(), value.into());
    }

    pub fn has_section(&self, section: &str) -> bool {
        self.sections.contains_key(section)
    }

    /// Sections whose name starts with `prefix.`, with the suffix.
    fn subsections<'a>(&'a self, prefix: &'a str) -> impl Iterator<Item = (&'a str, &'a BTreeMap<String, String>)> {
        self.sections.iter().filter_map(move |(name, map)| {
            name.strip_prefix(prefix).and_then(|rest| rest.strip_prefix('.')).map(|sub| (sub, map))
        })
    }

    /// Hex SHA-256 of the sorted `section.key=value` lines. The output path
    /// does not describe the experiment and is left out.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        for (section, map) in &self.sections {
            for (key, value) in map {
                if section == "experiment" && key == "output" {
                    continue;
                }
                h.update(format!("{section}.{key}={value}\n").as_bytes());
            }
        }
        hex::encode(h.finalize())
    }
}

impl fmt::Display for Ini {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (section, map)) in self.sections.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            writeln!(f, "[{section}]")?;
            for (key, value) in map {
                writeln!(f, "{key} = {value}")?;
            }
        }
        Ok(())
    }
}

/// Typed access to one section that rejects keys it does not know.
struct Section<'a> {
    name: String,
    map: Option<&'a BTreeMap<String, String>>,
}

impl<'a> Section<'a> {
    fn new(ini: &'a Ini, name: &str, known: &[&str]) -> Result<Self> {
        let map = ini.sections.get(name);
        Self::checked(name, map, known)
    }

    fn checked(name: &str, map: Option<&'a BTreeMap<String, String>>, known: &[&str]) -> Result<Self> {
        if let Some(bad) = map.and_then(|m| m.keys().find(|k| !known.contains(&k.as_str()))) {
            return Err(Error::validation(format!(
                "unknown key '{bad}' in [{name}] (expected one of: {})",
                known.join(", ")
            )));
        }
        Ok(Section { name: name.to_string(), map })
    }

    fn raw(&self, key: &str) -> Option<&'a str> {
        self.map.and_then(|m| m.get(key)).map(String::as_str)
    }

    fn parse<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        self.raw(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|_| Error::validation(format!("[{}] {key}: cannot parse '{v}'", self.name)))
            })
            .transpose()
    }

    fn set<T: FromStr>(&self, key: &str, dst: &mut T) -> Result<()> {
        if let Some(v) = self.parse(key)? {
            *dst = v;
        }
        Ok(())
    }

    fn list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>> {
        self.raw(key)
            .map(|v| {
                v.split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| {
                        s.parse::<T>()
                            .map_err(|_| Error::validation(format!("[{}] {key}: cannot parse '{s}'", self.name)))
                    })
                    .collect()
            })
            .transpose()
    }

    fn pair<T: FromStr + Copy>(&self, key: &str, dst: &mut (T, T)) -> Result<()> {
        if let Some(v) = self.list::<T>(key)? {
            match v.as_slice() {
                [a] => *dst = (*a, *a),
                [a, b] => *dst = (*a, *b),
                _ => return Err(Error::validation(format!("[{}] {key}: expected one or two values", self.name))),
            }
        }
        Ok(())
    }
}

/// How the training set is shrunk in a data-size sweep.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DataSizeMode {
    None,
    /// Keep a fraction of the training houses with all of their series.
    SubsetHouses,
    /// Keep every training house with a fraction of its series.
    SubsetSeries,
}

impl DataSizeMode {
    pub fn name(self) -> &'static str {
        match self {
            DataSizeMode::None => "none",
            DataSizeMode::SubsetHouses => "subset-houses",
            DataSizeMode::SubsetSeries => "subset-series",
        }
    }
}

impl fmt::Display for DataSizeMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DataSizeMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "none" => Ok(DataSizeMode::None),
            "subset-houses" => Ok(DataSizeMode::SubsetHouses),
            "subset-series" => Ok(DataSizeMode::SubsetSeries),
            other => Err(Error::validation(format!("unknown data size mode '{other}'"))),
        }
    }
}

/// Where the households come from.
#[derive(Clone, Debug, PartialEq)]
pub enum DatasetSource {
    Csv { path: PathBuf, schema: SchemaKind },
    Synthetic(SynthConfig),
}

pub const DEFAULT_BUDGET_S: f64 = 36_000.0;
pub const DEFAULT_RUNS: usize = 5;
pub const FREQUENCY_SWEEP_INTERVALS: [u32; 4] = [60, 600, 900, 1800];

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub source: DatasetSource,
    pub dataset_name: String,
    pub case_id: String,
    pub classifiers: Vec<ClassifierKind>,
    /// Target sampling intervals; `None` when the file does not list any.
    pub intervals_s: Option<Vec<u32>>,
    pub seeds: Vec<u64>,
    pub budget_s: f64,
    pub data_size_mode: DataSizeMode,
    pub fractions: Vec<f64>,
    pub output: Option<PathBuf>,
    /// Template; the interval and seed are set per run.
    pub preprocess: PreprocessConfig,
    pub params: ClassifierParams,
    digest: String,
}

/// Seeds written as a list `1, 2, 3` or an inclusive range `1..5`.
pub fn parse_seeds(raw: &str) -> Result<Vec<u64>> {
    let bad = || Error::validation(format!("[experiment] seeds: cannot parse '{raw}'"));
    if let Some((a, b)) = raw.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|_| bad())?;
        let b: u64 = b.trim().parse().map_err(|_| bad())?;
        if a > b {
            return Err(bad());
        }
        return Ok((a..=b).collect());
    }
    raw.split(',').map(|s| s.trim().parse().map_err(|_| bad())).collect()
}

fn parse_list<T: FromStr<Err = Error>>(raw: &str) -> Result<Vec<T>> {
    raw.split(',').map(str::trim).filter(|s| !s.is_empty()).map(str::parse).collect()
}

fn signature(s: &Section, kind: &str) -> Result<Signature> {
    Ok(match kind {
        "rectangular" => Signature::Rectangular,
        "spike-train" => Signature::SpikeTrain {
            spikes: s.parse("spikes")?.unwrap_or(3),
            period_s: s.parse("period_s")?.unwrap_or(600),
        },
        "cyclic" => Signature::Cyclic { on_s: s.parse("on_s")?.unwrap_or(600), off_s: s.parse("off_s")?.unwrap_or(1200) },
        other => return Err(Error::validation(format!("[{}] unknown signature '{other}'", s.name))),
    })
}

fn synthetic(ini: &Ini) -> Result<SynthConfig> {
    let s = Section::new(
        ini,
        "synthetic",
        &[
            "n_houses",
            "days_per_house",
            "base_interval_s",
            "start",
            "presence_prob",
            "noise_std",
            "seed",
            "background_w",
            "profile_amplitude_w",
            "habit_loads",
            "habit_power_w",
            "habit_duration_s",
        ],
    )?;
    let mut c = SynthConfig::default();
    s.set("n_houses", &mut c.n_houses)?;
    s.set("days_per_house", &mut c.days_per_house)?;
    s.set("base_interval_s", &mut c.base_interval_s)?;
    s.set("presence_prob", &mut c.presence_prob)?;
    s.set("noise_std", &mut c.noise_std)?;
    s.set("seed", &mut c.seed)?;
    if let Some(start) = s.raw("start") {
        c.start = DateTime::parse_from_rfc3339(start)
            .map_err(|e| Error::validation(format!("[synthetic] start: {e}")))?
            .with_timezone(&Utc);
    }
    let bg: &mut BackgroundModel = &mut c.background;
    s.set("background_w", &mut bg.base_w)?;
    s.set("profile_amplitude_w", &mut bg.profile_amplitude_w)?;
    s.set("habit_loads", &mut bg.habit_loads)?;
    s.pair("habit_power_w", &mut bg.habit_power_w)?;
    s.pair("habit_duration_s", &mut bg.habit_duration_s)?;

    let known = ["signature", "power_w", "duration_s", "spikes", "period_s", "on_s", "off_s", "activations", "presence_prob"];
    let mut appliances = Vec::new();
    for (name, map) in ini.subsections("appliance") {
        let a = Section::checked(&format!("appliance.{name}"), Some(map), &known)?;
        let mut model = ApplianceModel::rectangular(name, 2000.0, 3600);
        model.signature = signature(&a, a.raw("signature").unwrap_or("rectangular"))?;
        a.set("power_w", &mut model.power_w)?;
        a.set("duration_s", &mut model.duration_s)?;
        a.pair("activations", &mut model.activations_per_day)?;
        model.presence_prob = a.parse("presence_prob")?;
        appliances.push(model);
    }
    if !appliances.is_empty() {
        c.appliances = appliances;
    }
    c.validate()?;
    Ok(c)
}

fn preprocess(ini: &Ini) -> Result<PreprocessConfig> {
    let s = Section::new(
        ini,
        "preprocess",
        &[
            "max_gap_s",
            "slice",
            "on_threshold_w",
            "on_min_samples",
            "split",
            "train",
            "validation",
            "test",
            "holdout_houses",
            "validation_fraction",
        ],
    )?;
    let mut c = PreprocessConfig::default();
    s.set("max_gap_s", &mut c.max_gap_s)?;
    s.set("slice", &mut c.slice)?;
    s.set("on_threshold_w", &mut c.on_threshold_w)?;
    s.set("on_min_samples", &mut c.on_min_samples)?;
    c.split = match s.raw("split").unwrap_or("by-house") {
        "by-house" => {
            let SplitScheme::ByHouse { mut train, mut validation, mut test } = SplitScheme::default() else {
                unreachable!("the default split is by house")
            };
            s.set("train", &mut train)?;
            s.set("validation", &mut validation)?;
            s.set("test", &mut test)?;
            SplitScheme::ByHouse { train, validation, test }
        }
        "nilm-holdout" => SplitScheme::NilmHoldout {
            holdout_houses: s.parse("holdout_houses")?.unwrap_or(2),
            validation_fraction: s.parse("validation_fraction")?.unwrap_or(0.1),
        },
        other => return Err(Error::validation(format!("[preprocess] unknown split '{other}'"))),
    };
    Ok(c)
}

fn train_params(s: &Section, base: &TrainParams) -> Result<TrainParams> {
    let mut p = base.clone();
    s.set("learning_rate", &mut p.learning_rate)?;
    s.set("batch_size", &mut p.batch_size)?;
    s.set("max_epochs", &mut p.max_epochs)?;
    s.set("patience", &mut p.patience)?;
    p.validate()?;
    Ok(p)
}

fn classifier_params(ini: &Ini) -> Result<ClassifierParams> {
    let mut p = ClassifierParams::default();
    let neural_keys = ["learning_rate", "batch_size", "max_epochs", "patience"];
    let shared = train_params(&Section::new(ini, "neural", &neural_keys)?, &TrainParams::default())?;
    for (name, map) in ini.subsections("classifier") {
        let kind: ClassifierKind = name.parse()?;
        let section = format!("classifier.{name}");
        let known: &[&str] = match kind {
            ClassifierKind::KnnEuclid => &["k"],
            ClassifierKind::KnnDtw => &["k", "band"],
            ClassifierKind::Tsf => &["trees", "intervals_per_tree", "min_interval"],
            ClassifierKind::Rise => &["trees"],
            ClassifierKind::Boss => &["window_len", "word_len", "alphabet", "normalize", "numerosity_reduction"],
            ClassifierKind::BossEnsemble | ClassifierKind::CBoss => {
                &["retention_factor", "window_grid", "word_lens", "alphabet", "max_members", "subsample"]
            }
            ClassifierKind::Rocket => &["kernels", "lambdas"],
            ClassifierKind::MiniRocket => &["features", "max_dilations", "lambdas"],
            ClassifierKind::Arsenal => &["members", "kernels", "lambdas"],
            ClassifierKind::ConvNet | ClassifierKind::ResNet | ClassifierKind::InceptionTime => &neural_keys,
        };
        let s = Section::checked(&section, Some(map), known)?;
        match kind {
            ClassifierKind::KnnEuclid => s.set("k", &mut p.knn_k)?,
            ClassifierKind::KnnDtw => {
                s.set("k", &mut p.knn_k)?;
                if let Some(band) = s.raw("band") {
                    p.dtw_band = match band {
                        "none" => None,
                        _ => Some(s.parse("band")?.expect("present")),
                    };
                }
            }
            ClassifierKind::Tsf => {
                s.set("trees", &mut p.tsf.n_trees)?;
                p.tsf.intervals_per_tree = s.parse("intervals_per_tree")?.or(p.tsf.intervals_per_tree);
                s.set("min_interval", &mut p.tsf.min_interval)?;
            }
            ClassifierKind::Rise => s.set("trees", &mut p.rise.n_trees)?,
            ClassifierKind::Boss => {
                s.set("window_len", &mut p.boss.window_len)?;
                s.set("word_len", &mut p.boss.word_len)?;
                s.set("alphabet", &mut p.boss.alphabet)?;
                s.set("normalize", &mut p.boss.normalize_windows)?;
                s.set("numerosity_reduction", &mut p.boss.numerosity_reduction)?;
            }
            ClassifierKind::BossEnsemble | ClassifierKind::CBoss => {
                let e = if kind == ClassifierKind::CBoss { &mut p.cboss } else { &mut p.boss_ensemble };
                s.set("retention_factor", &mut e.retention_factor)?;
                s.set("window_grid", &mut e.window_grid)?;
                if let Some(v) = s.list("word_lens")? {
                    e.word_lens = v;
                }
                s.set("alphabet", &mut e.alphabet)?;
                s.set("max_members", &mut e.max_members)?;
                s.set("subsample", &mut e.subsample)?;
            }
            ClassifierKind::Rocket | ClassifierKind::MiniRocket | ClassifierKind::Arsenal => {
                let k = &mut p.kernel;
                match kind {
                    ClassifierKind::Rocket => s.set("kernels", &mut k.rocket_kernels)?,
                    ClassifierKind::MiniRocket => {
                        s.set("features", &mut k.minirocket_features)?;
                        s.set("max_dilations", &mut k.minirocket_max_dilations)?;
                    }
                    _ => {
                        s.set("members", &mut k.arsenal_members)?;
                        s.set("kernels", &mut k.arsenal_kernels)?;
                    }
                }
                if let Some(v) = s.list("lambdas")? {
                    k.lambdas = v;
                }
            }
            ClassifierKind::ConvNet => p.convnet = train_params(&s, &shared)?,
            ClassifierKind::ResNet => p.resnet = train_params(&s, &shared)?,
            ClassifierKind::InceptionTime => p.inceptiontime = train_params(&s, &shared)?,
        }
    }
    for (kind, dst) in [
        (ClassifierKind::ConvNet, &mut p.convnet),
        (ClassifierKind::ResNet, &mut p.resnet),
        (ClassifierKind::InceptionTime, &mut p.inceptiontime),
    ] {
        if !ini.has_section(&format!("classifier.{kind}")) {
            *dst = shared.clone();
        }
    }
    p.kernel.validate()?;
    Ok(p)
}

impl ExperimentConfig {
    /// Reads a config file; relative dataset and output paths resolve
    /// against the file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_ini(&Ini::load(path)?, base)
    }

    pub fn from_ini(ini: &Ini, base_dir: &Path) -> Result<Self> {
        for name in ini.sections.keys() {
            let top = name.split('.').next().unwrap_or_default();
            let known = matches!(top, "dataset" | "experiment" | "preprocess" | "neural" | "synthetic")
                || (name.contains('.') && matches!(top, "classifier" | "appliance"));
            if !known {
                return Err(Error::validation(format!("unknown section [{name}]")));
            }
        }
        let resolve = |p: &str| {
            let p = PathBuf::from(p);
            if p.is_absolute() {
                p
            } else {
                base_dir.join(p)
            }
        };

        let d = Section::new(ini, "dataset", &["path", "schema", "case", "name"])?;
        let source = match d.raw("path") {
            Some(path) => DatasetSource::Csv {
                path: resolve(path),
                schema: d.parse("schema")?.unwrap_or(SchemaKind::Nilm),
            },
            None if ini.has_section("synthetic") => DatasetSource::Synthetic(synthetic(ini)?),
            None => return Err(Error::validation("[dataset] needs a path, or add a [synthetic] section")),
        };
        let dataset_name = match (d.raw("name"), &source) {
            (Some(n), _) => n.to_string(),
            (None, DatasetSource::Synthetic(_)) => "synthetic".to_string(),
            (None, DatasetSource::Csv { path, .. }) => {
                path.file_stem().map_or("dataset".to_string(), |s| s.to_string_lossy().into_owned())
            }
        };
        let case_id = match (d.raw("case"), &source) {
            (Some(c), _) => c.to_string(),
            (None, DatasetSource::Synthetic(s)) if s.appliances.len() == 1 => s.appliances[0].name.clone(),
            _ => return Err(Error::validation("[dataset] case is required")),
        };

        let e = Section::new(
            ini,
            "experiment",
            &["classifiers", "intervals", "n_runs", "seeds", "budget_s", "data_size_mode", "fractions", "output"],
        )?;
        let classifiers = parse_list::<ClassifierKind>(e.raw("classifiers").unwrap_or(""))?;
        if classifiers.is_empty() {
            return Err(Error::validation("[experiment] classifiers must name at least one classifier"));
        }
        let intervals_s = e.list::<u32>("intervals")?;
        if intervals_s.as_ref().is_some_and(Vec::is_empty) {
            return Err(Error::validation("[experiment] intervals must not be empty"));
        }
        if let Some(bad) = intervals_s.iter().flatten().find(|&&i| i == 0 || DAY_S % i != 0) {
            return Err(Error::validation(format!("interval {bad} s does not divide one day")));
        }
        let n_runs: Option<usize> = e.parse("n_runs")?;
        let seeds = match (e.raw("seeds"), n_runs) {
            (Some(raw), n) => {
                let seeds = parse_seeds(raw)?;
                if let Some(n) = n.filter(|&n| n != seeds.len()) {
                    return Err(Error::validation(format!("n_runs = {n} but {} seeds are listed", seeds.len())));
                }
                seeds
            }
            (None, n) => (1..=n.unwrap_or(DEFAULT_RUNS) as u64).collect(),
        };
        if seeds.is_empty() {
            return Err(Error::validation("n_runs must be at least 1"));
        }
        let budget_s: f64 = e.parse("budget_s")?.unwrap_or(DEFAULT_BUDGET_S);
        if !(budget_s > 0.0 && budget_s.is_finite()) {
            return Err(Error::validation("budget_s must be positive"));
        }
        let data_size_mode: DataSizeMode = e.parse("data_size_mode")?.unwrap_or(DataSizeMode::None);
        let fractions = e.list::<f64>("fractions")?.unwrap_or_else(|| vec![1.0]);
        if fractions.is_empty() || fractions.iter().any(|p| !(*p > 0.0 && *p <= 1.0)) {
            return Err(Error::validation("fractions must lie in (0, 1]"));
        }

        let preprocess = preprocess(ini)?;
        let params = classifier_params(ini)?;
        Ok(ExperimentConfig {
            source,
            dataset_name,
            case_id,
            classifiers,
            intervals_s,
            seeds,
            budget_s,
            data_size_mode,
            fractions,
            output: e.raw("output").map(resolve),
            preprocess,
            params,
            digest: ini.digest(),
        })
    }

    /// Intervals of a benchmark run: the listed ones, or 30 minutes.
    pub fn intervals(&self) -> Vec<u32> {
        self.intervals_s.clone().unwrap_or_else(|| vec![1800])
    }

    /// Digest of the settings this config was built from.
    pub fn digest(&self) -> &str {
        &self.digest
    }

    /// Preprocessing settings of one run.
    pub fn preprocess_for(&self, interval_s: u32, seed: u64) -> PreprocessConfig {
        PreprocessConfig {
            target_interval_s: interval_s,
            max_gap_s: self.preprocess.max_gap_s.max(u64::from(interval_s)),
            seed,
            ..self.preprocess.clone()
        }
    }
}
