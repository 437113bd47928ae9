//! A small 1-D convolutional network stack with manual gradients and the
//! ConvNet, ResNet and InceptionTime classifiers built on it.
//!
//! All arithmetic is `f64`. Inputs are z-normalized per series before they
//! reach a network. Training is single-threaded and bit-reproducible for a
//! fixed seed.

pub mod checkpoint;
pub mod layers;
pub mod loss;
pub mod nets;
pub mod tensor;
pub mod train;

pub use layers::{BatchNorm1d, Conv1d, Gap, Inception, Layer, Linear, MaxPool1d, Relu, Residual, Sequential};
pub use loss::{softmax, softmax_ce};
pub use nets::{build_convnet, build_inception_network, build_network, build_resnet, resnet_block, Arch};
pub use tensor::{Param, Tensor3};
pub use train::{predict_proba, train_network, znorm, TrainParams, TrainReport};

use crate::classic::tsf::check_train;
use crate::classifier::{Deadline, FittedClassifier, Model};
use crate::error::{Error, Result};
use crate::rng;
use crate::series::{Label, LabeledInstance};

/// Trained member networks; the score is the mean positive-class softmax.
#[derive(Debug)]
pub struct NeuralModel {
    pub arch: Arch,
    pub members: Vec<Sequential>,
}

impl NeuralModel {
    fn member_proba(&self, member: &Sequential, x: &[f64]) -> f64 {
        let input = Tensor3::from_vec(1, 1, x.len(), x.to_vec()).expect("non-empty series");
        let logits = member.infer(&input).expect("input matches the fitted length");
        softmax(logits.item(0))[1]
    }
}

impl Model for NeuralModel {
    fn score(&self, values: &[f64]) -> f64 {
        let x = znorm(values);
        self.members.iter().map(|m| self.member_proba(m, &x)).sum::<f64>() / self.members.len() as f64
    }

    fn members(&self) -> usize {
        self.members.len()
    }

    fn encode(&self) -> Option<Vec<u8>> {
        Some(checkpoint::encode(self))
    }
}

fn prepared(instances: &[LabeledInstance]) -> (Vec<Vec<f64>>, Vec<Label>) {
    instances.iter().map(|i| (znorm(i.values()), i.label())).unzip()
}

/// Fits every member of `arch` and returns the classifier together with the
/// per-member training reports.
pub fn fit_neural_with_reports(
    train: &[LabeledInstance],
    validation: &[LabeledInstance],
    arch: Arch,
    params: &TrainParams,
    seed: u64,
    deadline: &Deadline,
) -> Result<(FittedClassifier, Vec<TrainReport>)> {
    let len = check_train(train, arch.min_len())?;
    if validation.is_empty() {
        return Err(Error::validation("neural training needs a non-empty validation set"));
    }
    if let Some(bad) = validation.iter().find(|v| v.len() != len) {
        return Err(Error::dimension(len, bad.len()));
    }
    let (train_x, train_y) = prepared(train);
    let (val_x, val_y) = prepared(validation);
    let mut members = Vec::with_capacity(arch.members());
    let mut reports = Vec::with_capacity(arch.members());
    for m in 0..arch.members() {
        let mut r = rng::named_stream(seed, arch.kind().name(), m as u64);
        let mut net = build_network(arch, len, &mut r)?;
        reports.push(train_network(&mut net, &train_x, &train_y, &val_x, &val_y, params, &mut r, deadline)?);
        members.push(net);
    }
    let model = NeuralModel { arch, members };
    Ok((FittedClassifier::new(arch.kind(), seed, len, model), reports))
}

pub fn fit_neural(
    train: &[LabeledInstance],
    validation: &[LabeledInstance],
    arch: Arch,
    params: &TrainParams,
    seed: u64,
    deadline: &Deadline,
) -> Result<FittedClassifier> {
    fit_neural_with_reports(train, validation, arch, params, seed, deadline).map(|(f, _)| f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::macro_f1;
    use crate::series::TimeSeries;
    use chrono::{TimeZone, Utc};
    use rand::Rng;

    /// Noise with a rectangular bump for positives.
    fn dataset(n: usize, t: usize, seed: u64) -> Vec<LabeledInstance> {
        let mut r = rng::stream(seed, 9);
        let start = Utc.with_ymd_and_hms(2024, 1, 1, 0, 0, 0).unwrap();
        (0..n)
            .map(|i| {
                let label = (i % 2) as Label;
                let mut v: Vec<f64> = (0..t).map(|_| r.random_range(0.0..50.0)).collect();
                if label == 1 {
                    let at = r.random_range(0..t - 4);
                    v[at..at + 4].iter_mut().for_each(|x| *x += 1000.0);
                }
                let s = TimeSeries::from_dense(start, 60, v, format!("h{i}")).unwrap();
                LabeledInstance::new(s, label, "test").unwrap()
            })
            .collect()
    }

    #[test]
    fn output_shapes() {
        let mut r = rng::stream(1, 1);
        for t in [8, 13, 50] {
            let net = build_convnet(t, &mut r).unwrap();
            assert_eq!(net.infer(&Tensor3::zeros(3, 1, t)).unwrap().shape(), (3, 2, 1));
            let net = build_resnet(t, &mut r).unwrap();
            assert_eq!(net.infer(&Tensor3::zeros(2, 1, t)).unwrap().shape(), (2, 2, 1));
        }
        let net = build_inception_network(40, &mut r).unwrap();
        assert_eq!(net.infer(&Tensor3::zeros(2, 1, 40)).unwrap().shape(), (2, 2, 1));
        assert!(build_convnet(7, &mut r).is_err());
        assert!(build_inception_network(39, &mut r).is_err());
        assert_eq!(Arch::InceptionTime.members(), 5);
    }

    #[test]
    fn zeroed_residual_block_passes_the_shortcut() {
        let mut main: Vec<Box<dyn Layer>> = Vec::new();
        for (i, k) in [8, 5, 3].into_iter().enumerate() {
            main.push(Box::new(Conv1d::from_weights(2, 2, k, vec![0.0; 4 * k], vec![0.0; 2]).unwrap()));
            main.push(Box::new(BatchNorm1d::new(2)));
            if i < 2 {
                main.push(Box::new(Relu::default()));
            }
        }
        let mut block = Residual::new(Sequential::new(main), None);
        let x = Tensor3::from_vec(2, 2, 6, (0..24).map(|v| f64::from(v) * 0.5).collect()).unwrap();
        assert_eq!(block.forward(&x).unwrap(), x);
    }

    #[test]
    fn znorm_guards_constant_series() {
        assert_eq!(znorm(&[5.0; 4]), vec![0.0; 4]);
        let z = znorm(&[1.0, 2.0, 3.0, 4.0]);
        assert!(z.iter().sum::<f64>().abs() < 1e-12);
        assert!((z.iter().map(|v| v * v).sum::<f64>() / 4.0 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn trailing_singleton_batch_is_merged() {
        let order: Vec<usize> = (0..33).collect();
        let b = train::batches(&order, 32);
        assert_eq!(b.len(), 1);
        assert_eq!(b[0].len(), 33);
        assert_eq!(train::batches(&order, 16).iter().map(Vec::len).collect::<Vec<_>>(), vec![16, 17]);
    }

    #[test]
    fn overfits_sixteen_instances() {
        let train = dataset(16, 24, 1);
        let (f, reports) =
            fit_neural_with_reports(&train, &train, Arch::ConvNet, &TrainParams::default(), 3, &Deadline::none()).unwrap();
        assert!(reports[0].epochs_run <= 100);
        let labels: Vec<Label> = train.iter().map(LabeledInstance::label).collect();
        assert_eq!(f.predict_batch(&train).unwrap(), labels);
    }

    #[test]
    fn training_is_deterministic() {
        let train = dataset(12, 16, 2);
        let val = dataset(6, 16, 3);
        let p = TrainParams { max_epochs: 3, ..TrainParams::default() };
        let (_, a) = fit_neural_with_reports(&train, &val, Arch::ResNet, &p, 7, &Deadline::none()).unwrap();
        let (_, b) = fit_neural_with_reports(&train, &val, Arch::ResNet, &p, 7, &Deadline::none()).unwrap();
        let bits = |r: &[TrainReport]| r[0].epoch_losses.iter().map(|l| l.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
    }

    #[test]
    fn best_epoch_is_restored() {
        let train = dataset(20, 16, 4);
        let val = dataset(10, 16, 5);
        let p = TrainParams { max_epochs: 8, patience: 8, ..TrainParams::default() };
        let (f, reports) = fit_neural_with_reports(&train, &val, Arch::ConvNet, &p, 1, &Deadline::none()).unwrap();
        let r = &reports[0];
        assert!(r.best_val_f1 >= r.final_val_f1);
        let truth: Vec<Label> = val.iter().map(LabeledInstance::label).collect();
        let f1 = macro_f1(&truth, &f.predict_batch(&val).unwrap()).unwrap();
        assert!((f1 - r.best_val_f1).abs() < 1e-12);
    }

    #[test]
    fn loss_decreases_on_a_fixed_batch() {
        let p = TrainParams { learning_rate: 1e-4, ..TrainParams::default() };
        let mut failures = 0;
        for seed in 0..5 {
            let data = dataset(16, 24, 10 + seed);
            let xs: Vec<Vec<f64>> = data.iter().map(|i| znorm(i.values())).collect();
            let labels: Vec<Label> = data.iter().map(LabeledInstance::label).collect();
            let idx: Vec<usize> = (0..16).collect();
            let batch = train::batch_tensor(&xs, &idx);
            let mut net = build_convnet(24, &mut rng::stream(seed, 0)).unwrap();
            let mut losses = Vec::new();
            for step in 1..=6 {
                let (loss, grad) = softmax_ce(&net.forward(&batch).unwrap(), &labels).unwrap();
                net.backward(&grad);
                train::adam_step(&mut net, &p, step);
                losses.push(loss);
            }
            if !losses.windows(2).all(|w| w[1] < w[0]) {
                failures += 1;
            }
        }
        assert!(failures <= 1);
    }

    #[test]
    fn checkpoints_round_trip() {
        let p = TrainParams { max_epochs: 1, ..TrainParams::default() };
        for arch in Arch::ALL {
            let train = dataset(6, 40, 6);
            let f = fit_neural(&train, &train, arch, &p, 2, &Deadline::none()).unwrap();
            assert_eq!(f.members(), arch.members());
            let g = FittedClassifier::from_bytes(&f.to_bytes().unwrap()).unwrap();
            assert_eq!(f.score_batch(&train).unwrap(), g.score_batch(&train).unwrap());
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let train = dataset(6, 16, 7);
        let p = TrainParams::default();
        assert!(fit_neural(&train, &[], Arch::ConvNet, &p, 1, &Deadline::none()).is_err());
        assert!(fit_neural(&train, &train, Arch::InceptionTime, &p, 1, &Deadline::none()).is_err());
        let bad = TrainParams { batch_size: 1, ..p };
        assert!(fit_neural(&train, &train, Arch::ConvNet, &bad, 1, &Deadline::none()).is_err());
    }
}
