use appliance_detect::dataio::{generate_synthetic, SynthConfig};
use appliance_detect::harness::{fit_classifier, ClassifierParams};
use appliance_detect::kernel::KernelParams;
use appliance_detect::neural::TrainParams;
use appliance_detect::preprocess::{preprocess, PreprocessConfig};
use appliance_detect::{ClassifierKind, Deadline, ExperimentSplit, FittedClassifier, LabeledInstance};

fn split() -> ExperimentSplit {
    let synth = SynthConfig { n_houses: 80, days_per_house: 2, seed: 11, ..SynthConfig::default() };
    let records = generate_synthetic(&synth).unwrap();
    let cfg = PreprocessConfig { target_interval_s: 1800, seed: 2, ..PreprocessConfig::default() };
    preprocess(&records, "appliance", &cfg).unwrap()
}

fn small_params() -> ClassifierParams {
    let neural = TrainParams { max_epochs: 30, ..TrainParams::default() };
    ClassifierParams {
        kernel: KernelParams {
            rocket_kernels: 500,
            minirocket_features: 840,
            arsenal_members: 3,
            arsenal_kernels: 200,
            ..KernelParams::default()
        },
        tsf: appliance_detect::classic::TsfParams { n_trees: 50, ..Default::default() },
        rise: appliance_detect::classic::RiseParams { n_trees: 50 },
        convnet: neural.clone(),
        resnet: neural.clone(),
        inceptiontime: TrainParams { max_epochs: 5, ..neural },
        ..ClassifierParams::default()
    }
}

fn accuracy(f: &FittedClassifier, test: &[LabeledInstance]) -> f64 {
    let pred = f.predict_batch(test).unwrap();
    pred.iter().zip(test).filter(|(p, i)| **p == i.label()).count() as f64 / test.len() as f64
}

#[test]
fn every_classifier_learns_a_two_kilowatt_hour() {
    let split = split();
    assert!(split.is_house_disjoint() && split.is_train_balanced());
    let params = small_params();
    for kind in ClassifierKind::ALL {
        // 48 samples are too short for InceptionTime's widest kernels.
        if kind == ClassifierKind::InceptionTime {
            continue;
        }
        let f = fit_classifier(kind, &split, &params, 3, &Deadline::none()).unwrap();
        assert_eq!(f.kind(), kind);
        let acc = accuracy(&f, &split.test);
        // Two-symbol words barely separate a lone pulse from noise.
        let floor = if kind == ClassifierKind::Boss { 0.6 } else { 0.8 };
        assert!(acc >= floor, "{kind}: accuracy {acc}");
        let scores = f.score_batch(&split.test).unwrap();
        assert!(scores.iter().all(|s| (0.0..=1.0).contains(s)), "{kind}");
        if f.is_persistable() {
            let g = FittedClassifier::from_bytes(&f.to_bytes().unwrap()).unwrap();
            assert_eq!(g.score_batch(&split.test).unwrap(), scores, "{kind}");
        }
    }
}

#[test]
fn fits_repeat_exactly() {
    let split = split();
    let params = small_params();
    for kind in [ClassifierKind::Tsf, ClassifierKind::CBoss, ClassifierKind::Arsenal, ClassifierKind::ConvNet] {
        let a = fit_classifier(kind, &split, &params, 5, &Deadline::none()).unwrap();
        let b = fit_classifier(kind, &split, &params, 5, &Deadline::none()).unwrap();
        let bits = |f: &FittedClassifier| f.score_batch(&split.test).unwrap().iter().map(|s| s.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b), "{kind}");
    }
}

#[test]
fn budgets_are_enforced() {
    let split = split();
    let params = ClassifierParams::default();
    for kind in [ClassifierKind::Rise, ClassifierKind::Rocket, ClassifierKind::ConvNet] {
        let err = fit_classifier(kind, &split, &params, 1, &Deadline::after_secs(1e-9)).unwrap_err();
        assert!(matches!(err, appliance_detect::Error::Timeout { .. }), "{kind}: {err}");
    }
}
