//! Benchmark, sampling-rate and data-size experiments.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;

use super::config::{DataSizeMode, DatasetSource, ExperimentConfig, FREQUENCY_SWEEP_INTERVALS};
use super::registry::fit_classifier;
use super::results::{RunRecord, RunStatus};
use crate::classifier::{ClassifierKind, Deadline};
use crate::dataio::{generate_synthetic, read_csv_dataset, HouseholdRecord};
use crate::error::{Error, Result};
use crate::eval::{timed, EvalReport};
use crate::preprocess::{balance_train, build_instances, partition_instances, UnbalancedSplit};
use crate::rng;
use crate::series::{ExperimentSplit, LabeledInstance};

/// Households named by the config: read from disk or generated.
pub fn load_records(cfg: &ExperimentConfig) -> Result<Vec<HouseholdRecord>> {
    match &cfg.source {
        DatasetSource::Csv { path, schema } => read_csv_dataset(path, *schema),
        DatasetSource::Synthetic(s) => generate_synthetic(s),
    }
}

/// Identifies a run apart from its classifier.
#[derive(Clone, Debug)]
struct RunMeta<'a> {
    cfg: &'a ExperimentConfig,
    experiment: &'static str,
    interval_s: u32,
    seed: u64,
    mode: DataSizeMode,
    fraction: f64,
}

impl RunMeta<'_> {
    fn record(&self, kind: ClassifierKind, status: RunStatus) -> RunRecord {
        let digest = self.cfg.digest();
        RunRecord {
            run_id: format!(
                "{}-{}-{kind}-{}s-{}-{}-s{}",
                &digest[..12],
                self.experiment,
                self.interval_s,
                self.mode,
                self.fraction,
                self.seed
            ),
            config_digest: digest.to_string(),
            experiment: self.experiment.to_string(),
            dataset: self.cfg.dataset_name.clone(),
            classifier: kind,
            case_id: self.cfg.case_id.clone(),
            interval_s: self.interval_s,
            seed: self.seed,
            data_size_mode: self.mode.to_string(),
            fraction: self.fraction,
            status,
            macro_f1: None,
            f1_pos: None,
            f1_neg: None,
            ib_ratio: None,
            n_train: 0,
            n_test: 0,
            train_time_s: 0.0,
            infer_time_s: 0.0,
            message: None,
        }
    }

    fn failed(&self, kind: ClassifierKind, err: &Error) -> RunRecord {
        let status = if matches!(err, Error::Timeout { .. }) { RunStatus::Timeout } else { RunStatus::Error };
        RunRecord { message: Some(err.to_string()), ..self.record(kind, status) }
    }

    /// Fits and evaluates one classifier. Runs whose training plus inference
    /// exceeds the budget are timeouts and carry no metrics.
    fn run(&self, kind: ClassifierKind, split: &ExperimentSplit) -> RunRecord {
        let budget = self.cfg.budget_s;
        let base = RunRecord { n_train: split.train.len(), n_test: split.test.len(), ..self.record(kind, RunStatus::Ok) };
        let deadline = Deadline::after_secs(budget);
        let (fitted, train_time_s) = timed(|| fit_classifier(kind, split, &self.cfg.params, self.seed, &deadline));
        let fitted = match fitted {
            Ok(f) => f,
            Err(e) => return RunRecord { train_time_s, ..self.failed(kind, &e) }.with_sizes(&base),
        };
        let (pred, infer_time_s) = timed(|| fitted.predict_batch(&split.test));
        let timing = RunRecord { train_time_s, infer_time_s, ..base };
        if train_time_s + infer_time_s > budget {
            return RunRecord { message: Some(Error::Timeout { budget_s: budget }.to_string()), ..timing }
                .with_status(RunStatus::Timeout);
        }
        let truth: Vec<_> = split.test.iter().map(LabeledInstance::label).collect();
        match pred.and_then(|p| EvalReport::new(&truth, &p, train_time_s, infer_time_s)) {
            Ok(report) => {
                log::info!(
                    "{kind} interval={}s seed={} fraction={} macro_f1={:.4} train={train_time_s:.1}s",
                    self.interval_s,
                    self.seed,
                    self.fraction,
                    report.macro_f1
                );
                RunRecord {
                    macro_f1: Some(report.macro_f1),
                    f1_pos: Some(report.positive.f1),
                    f1_neg: Some(report.negative.f1),
                    ib_ratio: Some(report.ib_ratio),
                    ..timing
                }
            }
            Err(e) => RunRecord { message: Some(e.to_string()), ..timing }.with_status(RunStatus::Error),
        }
    }
}

impl RunRecord {
    fn with_status(self, status: RunStatus) -> Self {
        RunRecord { status, ..self }
    }

    fn with_sizes(self, other: &RunRecord) -> Self {
        RunRecord { n_train: other.n_train, n_test: other.n_test, ..self }
    }
}

fn base_interval(records: &[HouseholdRecord]) -> Result<u32> {
    records
        .iter()
        .map(|r| r.aggregate().interval_s())
        .max()
        .ok_or_else(|| Error::validation("the dataset has no households"))
}

fn check_intervals(records: &[HouseholdRecord], intervals: &[u32]) -> Result<()> {
    let base = base_interval(records)?;
    if let Some(bad) = intervals.iter().find(|&&i| i < base || i % base != 0) {
        return Err(Error::validation(format!(
            "cannot resample {base} s data to {bad} s: rates must be multiples of the source interval"
        )));
    }
    Ok(())
}

fn instances_at(records: &[HouseholdRecord], cfg: &ExperimentConfig, interval_s: u32) -> Result<Vec<LabeledInstance>> {
    build_instances(records, &cfg.case_id, &cfg.preprocess_for(interval_s, 0))
}

fn run_grid(
    records: &[HouseholdRecord],
    cfg: &ExperimentConfig,
    experiment: &'static str,
    intervals: &[u32],
) -> Result<Vec<RunRecord>> {
    check_intervals(records, intervals)?;
    let mut out = Vec::new();
    for &interval_s in intervals {
        let instances = instances_at(records, cfg, interval_s)?;
        for &seed in &cfg.seeds {
            let meta = RunMeta { cfg, experiment, interval_s, seed, mode: DataSizeMode::None, fraction: 1.0 };
            let pcfg = cfg.preprocess_for(interval_s, seed);
            let split = partition_instances(&instances, pcfg.split, seed).and_then(|p| balanced(p, seed));
            out.extend(run_classifiers(&meta, split));
        }
    }
    Ok(out)
}

fn balanced(parts: UnbalancedSplit, seed: u64) -> Result<ExperimentSplit> {
    Ok(ExperimentSplit { train: balance_train(&parts.train_pool, seed)?, validation: parts.validation, test: parts.test, seed })
}

fn run_classifiers(meta: &RunMeta, split: Result<ExperimentSplit>) -> Vec<RunRecord> {
    meta.cfg
        .classifiers
        .iter()
        .map(|&kind| match &split {
            Ok(s) => meta.run(kind, s),
            Err(e) => meta.failed(kind, e),
        })
        .collect()
}

/// Every classifier at every configured interval for every seed.
pub fn run_benchmark_on(records: &[HouseholdRecord], cfg: &ExperimentConfig) -> Result<Vec<RunRecord>> {
    run_grid(records, cfg, "benchmark", &cfg.intervals())
}

pub fn run_benchmark(cfg: &ExperimentConfig) -> Result<Vec<RunRecord>> {
    run_benchmark_on(&load_records(cfg)?, cfg)
}

/// One benchmark per sampling rate, 1, 10, 15 and 30 minutes unless the
/// config lists its own. Labels come from the base grid, so they agree
/// across rates.
pub fn sweep_frequency_on(records: &[HouseholdRecord], cfg: &ExperimentConfig) -> Result<Vec<RunRecord>> {
    let intervals = cfg.intervals_s.clone().unwrap_or_else(|| FREQUENCY_SWEEP_INTERVALS.to_vec());
    run_grid(records, cfg, "frequency", &intervals)
}

pub fn sweep_frequency(cfg: &ExperimentConfig) -> Result<Vec<RunRecord>> {
    sweep_frequency_on(&load_records(cfg)?, cfg)
}

fn keep_count(p: f64, n: usize) -> usize {
    ((p * n as f64).ceil() as usize).clamp(1, n)
}

/// Shrinks the unbalanced training pool to a fraction `p`, keeping input
/// order. Smaller fractions keep a prefix of the same random order, so the
/// subsets are nested.
pub fn subset_train_pool(pool: &[LabeledInstance], mode: DataSizeMode, p: f64, seed: u64) -> Vec<LabeledInstance> {
    let mut houses: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, inst) in pool.iter().enumerate() {
        houses.entry(inst.source_id()).or_default().push(i);
    }
    let mut keep = vec![false; pool.len()];
    match mode {
        DataSizeMode::None => keep.fill(true),
        DataSizeMode::SubsetHouses => {
            let mut order: Vec<&Vec<usize>> = houses.values().collect();
            order.shuffle(&mut rng::named_stream(seed, "datasize-houses", 0));
            for idx in &order[..keep_count(p, order.len())] {
                idx.iter().for_each(|&i| keep[i] = true);
            }
        }
        DataSizeMode::SubsetSeries => {
            for (h, idx) in houses.values().enumerate() {
                let mut order = idx.clone();
                order.shuffle(&mut rng::named_stream(seed, "datasize-series", h as u64));
                order[..keep_count(p, order.len())].iter().for_each(|&i| keep[i] = true);
            }
        }
    }
    pool.iter().zip(keep).filter(|(_, k)| *k).map(|(x, _)| x.clone()).collect()
}

/// Trains on fractions of the training pool while validation and test stay
/// fixed per seed.
pub fn sweep_datasize_on(records: &[HouseholdRecord], cfg: &ExperimentConfig) -> Result<Vec<RunRecord>> {
    let mode = cfg.data_size_mode;
    if mode == DataSizeMode::None {
        return Err(Error::validation("set [experiment] data_size_mode to subset-houses or subset-series"));
    }
    let intervals = cfg.intervals();
    check_intervals(records, &intervals)?;
    let mut out = Vec::new();
    for &interval_s in &intervals {
        let instances = instances_at(records, cfg, interval_s)?;
        for &seed in &cfg.seeds {
            let pcfg = cfg.preprocess_for(interval_s, seed);
            let parts = partition_instances(&instances, pcfg.split, seed);
            for &fraction in &cfg.fractions {
                let meta = RunMeta { cfg, experiment: "datasize", interval_s, seed, mode, fraction };
                let split = match &parts {
                    Ok(p) => balance_train(&subset_train_pool(&p.train_pool, mode, fraction, seed), seed)
                        .map_err(|e| Error::validation(format!("fraction {fraction} leaves no usable training set: {e}")))
                        .map(|train| ExperimentSplit {
                            train,
                            validation: p.validation.clone(),
                            test: p.test.clone(),
                            seed,
                        }),
                    Err(e) => Err(Error::validation(e.to_string())),
                };
                out.extend(run_classifiers(&meta, split));
            }
        }
    }
    Ok(out)
}

pub fn sweep_datasize(cfg: &ExperimentConfig) -> Result<Vec<RunRecord>> {
    sweep_datasize_on(&load_records(cfg)?, cfg)
}
