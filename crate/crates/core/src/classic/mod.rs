//! Distance, interval and dictionary classifiers.

mod boss;
mod distance;
mod knn;
mod rise;
mod tree;
pub(crate) mod tsf;

pub use self::boss::{
    boss_distance, boss_transform, fit_boss, fit_boss_ensemble, sfa_coefficients, sfa_word, window_grid,
    word_symbols, BossParams, EnsembleMode, EnsembleParams, SfaBins, WordHistogram, BOSS_MIN_WINDOW,
};
pub use self::distance::{dtw_dist, euclid_dist, DEFAULT_DTW_BAND};
pub use self::knn::{fit_knn, Metric};
pub use self::rise::{acf, dft, fit_rise, rise_interval_features, RiseParams, RISE_MAX_LAG, RISE_MIN_INTERVAL};
pub use self::tree::DecisionTree;
pub use self::tsf::{fit_tsf, tsf_interval_features, TsfParams};
