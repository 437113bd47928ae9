//! Classifier construction by kind.

use crate::classic::{
    fit_boss, fit_boss_ensemble, fit_knn, fit_rise, fit_tsf, BossParams, EnsembleMode, EnsembleParams, Metric,
    RiseParams, TsfParams, DEFAULT_DTW_BAND,
};
use crate::classifier::{ClassifierKind, Deadline, FittedClassifier};
use crate::error::Result;
use crate::kernel::{fit_rocket_family, KernelParams, RocketVariant};
use crate::neural::{fit_neural, Arch, TrainParams};
use crate::series::ExperimentSplit;

/// Hyperparameters of every classifier; defaults follow the reference
/// implementations.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassifierParams {
    pub knn_k: usize,
    /// Sakoe-Chiba band as a fraction of the length; `None` is unconstrained.
    pub dtw_band: Option<f64>,
    pub tsf: TsfParams,
    pub rise: RiseParams,
    pub boss: BossParams,
    pub boss_ensemble: EnsembleParams,
    pub cboss: EnsembleParams,
    pub kernel: KernelParams,
    pub convnet: TrainParams,
    pub resnet: TrainParams,
    pub inceptiontime: TrainParams,
}

impl Default for ClassifierParams {
    fn default() -> Self {
        Self {
            knn_k: 1,
            dtw_band: Some(DEFAULT_DTW_BAND),
            tsf: TsfParams::default(),
            rise: RiseParams::default(),
            boss: BossParams::default(),
            boss_ensemble: EnsembleParams::default(),
            cboss: EnsembleParams::default(),
            kernel: KernelParams::default(),
            convnet: TrainParams::default(),
            resnet: TrainParams::default(),
            inceptiontime: TrainParams::default(),
        }
    }
}

impl ClassifierParams {
    pub fn neural(&self, arch: Arch) -> &TrainParams {
        match arch {
            Arch::ConvNet => &self.convnet,
            Arch::ResNet => &self.resnet,
            Arch::InceptionTime => &self.inceptiontime,
        }
    }
}

/// Fits `kind` on a split. Only the networks look at the validation set;
/// everything else trains on the balanced training set alone.
pub fn fit_classifier(
    kind: ClassifierKind,
    split: &ExperimentSplit,
    params: &ClassifierParams,
    seed: u64,
    deadline: &Deadline,
) -> Result<FittedClassifier> {
    let train = &split.train;
    match kind {
        ClassifierKind::KnnEuclid => fit_knn(train, Metric::Euclid, params.knn_k, seed),
        ClassifierKind::KnnDtw => fit_knn(train, Metric::Dtw { band: params.dtw_band }, params.knn_k, seed),
        ClassifierKind::Tsf => fit_tsf(train, &params.tsf, seed, deadline),
        ClassifierKind::Rise => fit_rise(train, &params.rise, seed, deadline),
        ClassifierKind::Boss => fit_boss(train, &params.boss, seed),
        ClassifierKind::BossEnsemble => {
            fit_boss_ensemble(train, EnsembleMode::Full, &params.boss_ensemble, seed, deadline)
        }
        ClassifierKind::CBoss => fit_boss_ensemble(train, EnsembleMode::Compact, &params.cboss, seed, deadline),
        ClassifierKind::Rocket => fit_rocket_family(train, RocketVariant::Rocket, &params.kernel, seed, deadline),
        ClassifierKind::MiniRocket => {
            fit_rocket_family(train, RocketVariant::MiniRocket, &params.kernel, seed, deadline)
        }
        ClassifierKind::Arsenal => fit_rocket_family(train, RocketVariant::Arsenal, &params.kernel, seed, deadline),
        ClassifierKind::ConvNet | ClassifierKind::ResNet | ClassifierKind::InceptionTime => {
            let arch = Arch::from_kind(kind).expect("neural kind");
            fit_neural(train, &split.validation, arch, params.neural(arch), seed, deadline)
        }
    }
}
