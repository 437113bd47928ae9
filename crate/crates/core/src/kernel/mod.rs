//! Random-convolution transforms (ROCKET, MiniRocket, Arsenal) feeding a
//! ridge classifier.

pub mod features;
pub mod minirocket;
pub mod persist;
pub mod ridge;
pub mod rocket;

use std::str::FromStr;

pub use features::{ColumnKind, FeatureMatrix};
pub use minirocket::{fit_minirocket, minirocket_features, minirocket_transform, MiniRocketParams};
pub use ridge::{default_lambdas, fit_ridge, logistic, Ridge, Standardizer};
pub use rocket::{apply_kernel, rocket_features, rocket_transform, sample_kernels, RandomKernel};

use crate::classic::tsf::check_train;
use crate::classifier::{label_of, ClassifierKind, Deadline, FittedClassifier, Model};
use crate::error::{Error, Result};
use crate::series::{Label, LabeledInstance};
use persist::Writer;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RocketVariant {
    Rocket,
    MiniRocket,
    Arsenal,
}

impl RocketVariant {
    pub fn kind(self) -> ClassifierKind {
        match self {
            RocketVariant::Rocket => ClassifierKind::Rocket,
            RocketVariant::MiniRocket => ClassifierKind::MiniRocket,
            RocketVariant::Arsenal => ClassifierKind::Arsenal,
        }
    }
}

impl FromStr for RocketVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.parse::<ClassifierKind>()? {
            ClassifierKind::Rocket => Ok(RocketVariant::Rocket),
            ClassifierKind::MiniRocket => Ok(RocketVariant::MiniRocket),
            ClassifierKind::Arsenal => Ok(RocketVariant::Arsenal),
            other => Err(Error::validation(format!("{other} is not a random-kernel classifier"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct KernelParams {
    pub rocket_kernels: usize,
    pub minirocket_features: usize,
    pub minirocket_max_dilations: usize,
    pub arsenal_members: usize,
    pub arsenal_kernels: usize,
    pub lambdas: Vec<f64>,
}

impl Default for KernelParams {
    fn default() -> Self {
        Self {
            rocket_kernels: 10_000,
            minirocket_features: 10_000,
            minirocket_max_dilations: 32,
            arsenal_members: 25,
            arsenal_kernels: 2000,
            lambdas: default_lambdas(),
        }
    }
}

impl KernelParams {
    pub fn validate(&self) -> Result<()> {
        if self.rocket_kernels == 0 || self.arsenal_kernels == 0 || self.arsenal_members == 0 {
            return Err(Error::validation("kernel counts and Arsenal members must be positive"));
        }
        if self.minirocket_features < minirocket::MINIROCKET_KERNELS || self.minirocket_max_dilations == 0 {
            return Err(Error::validation(format!(
                "MiniRocket needs at least {} features and one dilation",
                minirocket::MINIROCKET_KERNELS
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct RocketModel {
    pub kernels: Vec<RandomKernel>,
    pub ridge: Ridge,
}

impl RocketModel {
    fn write(&self, w: &mut Writer) {
        persist::write_kernels(w, &self.kernels);
        persist::write_ridge(w, &self.ridge);
    }
}

impl Model for RocketModel {
    fn score(&self, values: &[f64]) -> f64 {
        self.ridge.score(&rocket_features(values, &self.kernels))
    }

    fn encode(&self) -> Option<Vec<u8>> {
        let mut w = Writer::new();
        w.u8(persist::TAG_ROCKET);
        self.write(&mut w);
        Some(w.into_bytes())
    }
}

#[derive(Clone, Debug)]
pub struct MiniRocketModel {
    pub params: MiniRocketParams,
    pub ridge: Ridge,
}

impl Model for MiniRocketModel {
    fn score(&self, values: &[f64]) -> f64 {
        self.ridge.score(&minirocket_features(values, &self.params))
    }

    fn encode(&self) -> Option<Vec<u8>> {
        let mut w = Writer::new();
        w.u8(persist::TAG_MINIROCKET);
        persist::write_minirocket(&mut w, &self.params);
        persist::write_ridge(&mut w, &self.ridge);
        Some(w.into_bytes())
    }
}

/// Independent small ROCKETs; the score is the fraction of positive votes.
#[derive(Clone, Debug)]
pub struct ArsenalModel {
    pub members: Vec<RocketModel>,
}

impl ArsenalModel {
    /// Mean of the member ridge scores.
    pub fn mean_member_score(&self, values: &[f64]) -> f64 {
        self.members.iter().map(|m| m.score(values)).sum::<f64>() / self.members.len() as f64
    }
}

impl Model for ArsenalModel {
    fn score(&self, values: &[f64]) -> f64 {
        let votes = self.members.iter().filter(|m| label_of(m.score(values)) == 1).count();
        votes as f64 / self.members.len() as f64
    }

    fn members(&self) -> usize {
        self.members.len()
    }

    fn encode(&self) -> Option<Vec<u8>> {
        let mut w = Writer::new();
        w.u8(persist::TAG_ARSENAL);
        w.u32(self.members.len() as u32);
        self.members.iter().for_each(|m| m.write(&mut w));
        Some(w.into_bytes())
    }
}

fn fit_rocket_member(
    series: &[&[f64]],
    labels: &[Label],
    n_kernels: usize,
    family: &str,
    lambdas: &[f64],
    seed: u64,
    deadline: &Deadline,
) -> Result<RocketModel> {
    let kernels = sample_kernels(n_kernels, series[0].len(), seed, family)?;
    let x = rocket_transform(series, &kernels, deadline)?;
    deadline.check()?;
    let ridge = fit_ridge(&x, labels, lambdas)?;
    Ok(RocketModel { kernels, ridge })
}

/// Transform plus ridge for ROCKET and MiniRocket; Arsenal fits one ridge per
/// member on its own kernel set.
pub fn fit_rocket_family(
    train: &[LabeledInstance],
    variant: RocketVariant,
    params: &KernelParams,
    seed: u64,
    deadline: &Deadline,
) -> Result<FittedClassifier> {
    params.validate()?;
    let min_len = match variant {
        RocketVariant::MiniRocket => minirocket::MINIROCKET_MIN_LEN,
        _ => rocket::ROCKET_MIN_LEN,
    };
    let len = check_train(train, min_len)?;
    let series: Vec<&[f64]> = train.iter().map(LabeledInstance::values).collect();
    let labels: Vec<Label> = train.iter().map(LabeledInstance::label).collect();
    let kind = variant.kind();
    match variant {
        RocketVariant::Rocket => {
            let model = fit_rocket_member(&series, &labels, params.rocket_kernels, "rocket", &params.lambdas, seed, deadline)?;
            Ok(FittedClassifier::new(kind, seed, len, model))
        }
        RocketVariant::MiniRocket => {
            let mp = fit_minirocket(&series, params.minirocket_features, params.minirocket_max_dilations, seed)?;
            let x = minirocket_transform(&series, &mp, deadline)?;
            deadline.check()?;
            let ridge = fit_ridge(&x, &labels, &params.lambdas)?;
            Ok(FittedClassifier::new(kind, seed, len, MiniRocketModel { params: mp, ridge }))
        }
        RocketVariant::Arsenal => {
            let members = (0..params.arsenal_members)
                .map(|m| {
                    let family = format!("arsenal-{m}");
                    fit_rocket_member(&series, &labels, params.arsenal_kernels, &family, &params.lambdas, seed, deadline)
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(FittedClassifier::new(kind, seed, len, ArsenalModel { members }))
        }
    }
}

pub fn fit_rocket(train: &[LabeledInstance], seed: u64, deadline: &Deadline) -> Result<FittedClassifier> {
    fit_rocket_family(train, RocketVariant::Rocket, &KernelParams::default(), seed, deadline)
}

pub fn fit_minirocket_classifier(train: &[LabeledInstance], seed: u64, deadline: &Deadline) -> Result<FittedClassifier> {
    fit_rocket_family(train, RocketVariant::MiniRocket, &KernelParams::default(), seed, deadline)
}

pub fn fit_arsenal(train: &[LabeledInstance], seed: u64, deadline: &Deadline) -> Result<FittedClassifier> {
    fit_rocket_family(train, RocketVariant::Arsenal, &KernelParams::default(), seed, deadline)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::TimeSeries;
    use chrono::{TimeZone, Utc};
    use rand::Rng;

    /// Noise with a rectangular bump for positives.
    fn dataset(n: usize, t: usize, seed: u64) -> Vec<LabeledInstance> {
        let mut r = crate::rng::stream(seed, 21);
        let start = Utc.with_ymd_and_hms(2024, 1, 1, 0, 0, 0).unwrap();
        (0..n)
            .map(|i| {
                let label = (i % 2) as Label;
                let mut v: Vec<f64> = (0..t).map(|_| r.random_range(100.0..300.0)).collect();
                if label == 1 {
                    let at = r.random_range(0..t - 6);
                    v[at..at + 6].iter_mut().for_each(|x| *x += 2000.0);
                }
                let s = TimeSeries::from_dense(start, 60, v, format!("h{i}")).unwrap();
                LabeledInstance::new(s, label, "test").unwrap()
            })
            .collect()
    }

    fn small() -> KernelParams {
        KernelParams {
            rocket_kernels: 300,
            minirocket_features: 840,
            arsenal_members: 4,
            arsenal_kernels: 100,
            ..KernelParams::default()
        }
    }

    fn accuracy(model: &FittedClassifier, data: &[LabeledInstance]) -> f64 {
        let labels = model.predict_batch(data).unwrap();
        labels.iter().zip(data).filter(|(l, d)| **l == d.label()).count() as f64 / data.len() as f64
    }

    #[test]
    fn variants_separate_and_are_deterministic() {
        let train = dataset(40, 60, 1);
        let test = dataset(40, 60, 2);
        for v in [RocketVariant::Rocket, RocketVariant::MiniRocket, RocketVariant::Arsenal] {
            let a = fit_rocket_family(&train, v, &small(), 3, &Deadline::none()).unwrap();
            let b = fit_rocket_family(&train, v, &small(), 3, &Deadline::none()).unwrap();
            assert_eq!(a.score_batch(&test).unwrap(), b.score_batch(&test).unwrap());
            assert!(accuracy(&a, &test) >= 0.9, "{v:?}");
        }
    }

    #[test]
    fn arsenal_members_and_votes() {
        let train = dataset(20, 40, 5);
        let f = fit_rocket_family(&train, RocketVariant::Arsenal, &small(), 1, &Deadline::none()).unwrap();
        assert_eq!(f.members(), 4);
        let s = f.score_values(train[0].values()).unwrap();
        assert!([0.0, 0.25, 0.5, 0.75, 1.0].contains(&s));
        assert_eq!(KernelParams::default().arsenal_members * KernelParams::default().arsenal_kernels, 50_000);
    }

    #[test]
    fn round_trip_through_bytes() {
        let train = dataset(20, 40, 6);
        for v in [RocketVariant::Rocket, RocketVariant::MiniRocket, RocketVariant::Arsenal] {
            let f = fit_rocket_family(&train, v, &small(), 2, &Deadline::none()).unwrap();
            let bytes = f.to_bytes().unwrap();
            let g = FittedClassifier::from_bytes(&bytes).unwrap();
            assert_eq!(g.kind(), f.kind());
            assert_eq!(f.score_batch(&train).unwrap(), g.score_batch(&train).unwrap());
            assert!(FittedClassifier::from_bytes(&bytes[..bytes.len() - 3]).is_err());
        }
    }

    #[test]
    fn rejects_short_series_and_bad_params() {
        let train = dataset(10, 9, 7);
        assert!(fit_rocket_family(&train, RocketVariant::MiniRocket, &small(), 1, &Deadline::none()).is_err());
        assert!(fit_rocket_family(&train, RocketVariant::Rocket, &small(), 1, &Deadline::none()).is_ok());
        let bad = KernelParams { arsenal_members: 0, ..small() };
        assert!(fit_rocket_family(&train, RocketVariant::Arsenal, &bad, 1, &Deadline::none()).is_err());
        assert!("knn-dtw".parse::<RocketVariant>().is_err());
        assert_eq!("MiniRocket".parse::<RocketVariant>().unwrap(), RocketVariant::MiniRocket);
    }
}
