//! House-level splitting and class balancing.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::rng;
use crate::series::{ExperimentSplit, LabeledInstance};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SplitScheme {
    /// Random partition of the houses into train / validation / test.
    ByHouse { train: f64, validation: f64, test: f64 },
    /// `holdout_houses` random test houses; a `validation_fraction` of the
    /// remaining instances is held out for validation.
    NilmHoldout { holdout_houses: usize, validation_fraction: f64 },
}

impl Default for SplitScheme {
    fn default() -> Self {
        SplitScheme::ByHouse { train: 0.7, validation: 0.1, test: 0.2 }
    }
}

/// Houses assigned to each side of a split.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HouseAssignment {
    pub train: BTreeSet<String>,
    pub validation: BTreeSet<String>,
    pub test: BTreeSet<String>,
}

/// Randomly assigns distinct houses to train / validation / test.
///
/// Under `NilmHoldout` the validation set of houses is empty; the holdout of
/// validation instances happens in [`split_instances`].
pub fn assign_houses(houses: &BTreeSet<String>, scheme: SplitScheme, seed: u64) -> Result<HouseAssignment> {
    let mut order: Vec<&String> = houses.iter().collect();
    order.shuffle(&mut rng::named_stream(seed, "split-houses", 0));
    let n = order.len();
    let (n_val, n_test) = match scheme {
        SplitScheme::ByHouse { train, validation, test } => {
            if n < 4 {
                return Err(Error::validation(format!("a by-house split needs at least 4 houses, found {n}")));
            }
            let total = train + validation + test;
            if !(total > 0.0) || train <= 0.0 || validation < 0.0 || test <= 0.0 {
                return Err(Error::validation("split proportions must be positive"));
            }
            let n_test = ((test / total * n as f64).round() as usize).max(1);
            let n_val = ((validation / total * n as f64).round() as usize).max(usize::from(validation > 0.0));
            if n_test + n_val >= n {
                return Err(Error::validation(format!("too few houses ({n}) for the requested proportions")));
            }
            (n_val, n_test)
        }
        SplitScheme::NilmHoldout { holdout_houses, .. } => {
            if holdout_houses == 0 || holdout_houses >= n {
                return Err(Error::validation(format!(
                    "cannot hold out {holdout_houses} of {n} houses for testing"
                )));
            }
            (0, holdout_houses)
        }
    };
    let collect = |s: &[&String]| s.iter().map(|h| h.to_string()).collect::<BTreeSet<_>>();
    Ok(HouseAssignment {
        test: collect(&order[..n_test]),
        validation: collect(&order[n_test..n_test + n_val]),
        train: collect(&order[n_test + n_val..]),
    })
}

/// Undersamples the majority class to the minority size.
///
/// Retained instances keep their input order.
pub fn balance_train(instances: &[LabeledInstance], seed: u64) -> Result<Vec<LabeledInstance>> {
    let (pos, neg): (Vec<usize>, Vec<usize>) = (0..instances.len()).partition(|&i| instances[i].label() == 1);
    if pos.is_empty() || neg.is_empty() {
        let case = instances.first().map_or("<empty>", |i| i.case_id());
        return Err(Error::validation(format!(
            "case '{case}': training data has {} positive and {} negative instances; both classes are required",
            pos.len(),
            neg.len()
        )));
    }
    let (mut major, minor) = if pos.len() >= neg.len() { (pos, neg) } else { (neg, pos) };
    major.shuffle(&mut rng::named_stream(seed, "balance", 0));
    major.truncate(minor.len());
    let mut keep: Vec<usize> = major.into_iter().chain(minor).collect();
    keep.sort_unstable();
    Ok(keep.into_iter().map(|i| instances[i].clone()).collect())
}

/// Fraction of positive instances.
pub fn imbalance_ratio(instances: &[LabeledInstance]) -> Result<f64> {
    if instances.is_empty() {
        return Err(Error::validation("imbalance ratio of an empty set"));
    }
    Ok(instances.iter().filter(|i| i.label() == 1).count() as f64 / instances.len() as f64)
}

/// Train pool before balancing, with validation and test already fixed.
#[derive(Clone, Debug)]
pub struct UnbalancedSplit {
    pub train_pool: Vec<LabeledInstance>,
    pub validation: Vec<LabeledInstance>,
    pub test: Vec<LabeledInstance>,
}

pub fn partition_instances(instances: &[LabeledInstance], scheme: SplitScheme, seed: u64) -> Result<UnbalancedSplit> {
    let houses: BTreeSet<String> = instances.iter().map(|i| i.source_id().to_string()).collect();
    let assignment = assign_houses(&houses, scheme, seed)?;
    let pick = |set: &BTreeSet<String>| -> Vec<LabeledInstance> {
        instances.iter().filter(|i| set.contains(i.source_id())).cloned().collect()
    };
    let test = pick(&assignment.test);
    let (train_pool, validation) = match scheme {
        SplitScheme::ByHouse { .. } => (pick(&assignment.train), pick(&assignment.validation)),
        SplitScheme::NilmHoldout { validation_fraction, .. } => {
            let pool = pick(&assignment.train);
            let mut idx: Vec<usize> = (0..pool.len()).collect();
            idx.shuffle(&mut rng::named_stream(seed, "split-validation", 0));
            let n_val = ((validation_fraction * pool.len() as f64).round() as usize)
                .max(usize::from(validation_fraction > 0.0))
                .min(pool.len().saturating_sub(2));
            let val: BTreeSet<usize> = idx[..n_val].iter().copied().collect();
            let (v, t): (Vec<_>, Vec<_>) = pool.into_iter().enumerate().partition(|(i, _)| val.contains(i));
            (t.into_iter().map(|(_, x)| x).collect(), v.into_iter().map(|(_, x)| x).collect())
        }
    };
    Ok(UnbalancedSplit { train_pool, validation, test })
}

/// House-disjoint split with a class-balanced training set.
pub fn split_instances(instances: &[LabeledInstance], scheme: SplitScheme, seed: u64) -> Result<ExperimentSplit> {
    let parts = partition_instances(instances, scheme, seed)?;
    Ok(ExperimentSplit {
        train: balance_train(&parts.train_pool, seed)?,
        validation: parts.validation,
        test: parts.test,
        seed,
    })
}

/// Instances grouped per house, houses in sorted order.
pub fn by_house(instances: &[LabeledInstance]) -> BTreeMap<&str, Vec<&LabeledInstance>> {
    let mut out: BTreeMap<&str, Vec<&LabeledInstance>> = BTreeMap::new();
    for inst in instances {
        out.entry(inst.source_id()).or_default().push(inst);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::TimeSeries;
    use chrono::{Duration, TimeZone, Utc};
    use proptest::prelude::*;

    fn inst(house: usize, day: i64, label: u8) -> LabeledInstance {
        let start = Utc.with_ymd_and_hms(2014, 1, 1, 0, 0, 0).unwrap() + Duration::days(day);
        let s = TimeSeries::from_dense(start, 1800, vec![1.0; 4], format!("house_{house:02}")).unwrap();
        LabeledInstance::new(s, label, "kettle").unwrap()
    }

    fn houses(n: usize) -> BTreeSet<String> {
        (0..n).map(|i| format!("house_{i:02}")).collect()
    }

    #[test]
    fn seventy_ten_twenty() {
        let a = assign_houses(&houses(10), SplitScheme::default(), 3).unwrap();
        assert_eq!((a.train.len(), a.validation.len(), a.test.len()), (7, 1, 2));
        assert!(assign_houses(&houses(3), SplitScheme::default(), 3).is_err());
    }

    #[test]
    fn holdout_houses() {
        let scheme = SplitScheme::NilmHoldout { holdout_houses: 2, validation_fraction: 0.1 };
        let a = assign_houses(&houses(20), scheme, 5).unwrap();
        assert_eq!((a.train.len(), a.test.len()), (18, 2));
        assert!(a.train.is_disjoint(&a.test));
    }

    #[test]
    fn balancing() {
        let mut v: Vec<LabeledInstance> = (0..100).map(|d| inst(0, d, 1)).collect();
        v.extend((100..140).map(|d| inst(0, d, 0)));
        let b = balance_train(&v, 9).unwrap();
        assert_eq!(b.iter().filter(|i| i.label() == 1).count(), 40);
        assert_eq!(b.iter().filter(|i| i.label() == 0).count(), 40);
        let again = balance_train(&v, 9).unwrap();
        let ids = |x: &[LabeledInstance]| x.iter().map(LabeledInstance::id).collect::<Vec<_>>();
        assert_eq!(ids(&b), ids(&again));

        let even: Vec<LabeledInstance> = (0..80).map(|d| inst(0, d, u8::from(d < 40))).collect();
        assert_eq!(balance_train(&even, 1).unwrap(), even);

        let err = balance_train(&v[..100], 1).unwrap_err();
        assert!(err.to_string().contains("kettle"));
    }

    #[test]
    fn imbalance() {
        let v: Vec<LabeledInstance> = (0..100).map(|d| inst(0, d, u8::from(d < 93))).collect();
        assert!((imbalance_ratio(&v).unwrap() - 0.93).abs() < 1e-15);
        assert_eq!(imbalance_ratio(&v[..2]).unwrap(), 1.0);
        assert!(imbalance_ratio(&[]).is_err());
    }

    fn dataset(n_houses: usize, seed: u64) -> Vec<LabeledInstance> {
        use rand::Rng;
        let mut r = rng::stream(seed, 99);
        let mut out = Vec::new();
        for h in 0..n_houses {
            for d in 0..r.random_range(2..8) {
                out.push(inst(h, d, r.random_range(0..2)));
            }
        }
        out
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]
        #[test]
        fn splits_are_disjoint_and_balanced(n_houses in 6usize..30, seed in 0u64..10_000) {
            let data = dataset(n_houses, seed);
            if let Ok(split) = split_instances(&data, SplitScheme::default(), seed) {
                prop_assert!(split.is_house_disjoint());
                prop_assert!(split.is_train_balanced());
                prop_assert!(!split.train.is_empty());
            }
        }
    }

    #[test]
    fn house_counts_hold_for_seeds_1_to_20() {
        for seed in 1..=20 {
            let a = assign_houses(&houses(20), SplitScheme::default(), seed).unwrap();
            assert_eq!((a.train.len(), a.validation.len(), a.test.len()), (14, 2, 4));
            assert!(a.train.is_disjoint(&a.test) && a.validation.is_disjoint(&a.test));
            assert!(a.train.is_disjoint(&a.validation));
        }
    }
}
