//! Symbolic Fourier Approximation and the BOSS dictionary classifiers.
//!
//! Every sliding window is reduced to its first Fourier coefficients, each
//! coefficient is quantised with per-coefficient quantile bins (Multiple
//! Coefficient Binning) and the symbols are packed into a `u64` word. A
//! series becomes a histogram of its words.

use std::f64::consts::PI;

use rand::seq::SliceRandom;
use rayon::prelude::*;

use super::tsf::check_train;
use crate::classifier::{ClassifierKind, Deadline, FittedClassifier, Model};
use crate::error::{Error, Result};
use crate::rng;
use crate::series::{Label, LabeledInstance};

pub const BOSS_MIN_WINDOW: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BossParams {
    pub window_len: usize,
    pub word_len: usize,
    pub alphabet: usize,
    pub normalize_windows: bool,
    pub numerosity_reduction: bool,
}

impl Default for BossParams {
    fn default() -> Self {
        Self { window_len: 10, word_len: 10, alphabet: 2, normalize_windows: true, numerosity_reduction: true }
    }
}

impl BossParams {
    pub fn validate(&self, series_len: usize) -> Result<()> {
        let BossParams { window_len: l, word_len: w, alphabet: a, .. } = *self;
        if l < BOSS_MIN_WINDOW || l > series_len {
            return Err(Error::validation(format!(
                "window length {l} must lie in [{BOSS_MIN_WINDOW}, {series_len}]"
            )));
        }
        if w < 2 || w % 2 != 0 {
            return Err(Error::validation(format!("word length {w} must be even and at least 2")));
        }
        if a < 2 {
            return Err(Error::validation(format!("alphabet size {a} must be at least 2")));
        }
        if w / 2 > l / 2 {
            return Err(Error::validation(format!("a window of {l} has too few Fourier coefficients for {w} symbols")));
        }
        if (w as f64) * (a as f64).log2() > 64.0 {
            return Err(Error::validation(format!("{a}^{w} words do not fit in 64 bits")));
        }
        Ok(())
    }

    fn first_coefficient(&self) -> usize {
        usize::from(self.normalize_windows)
    }
}

/// Population mean and standard deviation; `None` for a constant window.
fn window_spread(window: &[f64]) -> Option<f64> {
    if window.iter().all(|&v| v == window[0]) {
        return None;
    }
    let n = window.len() as f64;
    let mean = window.iter().sum::<f64>() / n;
    let var = window.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    Some(var.sqrt())
}

/// The `word_len` real/imaginary coefficient slots of one window, computed
/// directly.
pub fn sfa_coefficients(window: &[f64], params: &BossParams) -> Vec<f64> {
    let l = window.len();
    let k0 = params.first_coefficient();
    let mut out = vec![0.0; params.word_len];
    let scale = if params.normalize_windows {
        match window_spread(window) {
            Some(sd) => 1.0 / sd,
            None => return out,
        }
    } else {
        1.0
    };
    for c in 0..params.word_len / 2 {
        let k = k0 + c;
        let (mut re, mut im) = (0.0, 0.0);
        for (j, &x) in window.iter().enumerate() {
            let angle = -2.0 * PI * ((k * j) % l) as f64 / l as f64;
            re += x * angle.cos();
            im += x * angle.sin();
        }
        out[2 * c] = re * scale;
        out[2 * c + 1] = im * scale;
    }
    out
}

/// Coefficient slots of every stride-1 window of `series`, row-major, via a
/// sliding DFT.
fn sliding_coefficients(series: &[f64], params: &BossParams) -> Vec<f64> {
    let l = params.window_len;
    let w = params.word_len;
    let n_windows = series.len() + 1 - l;
    let k0 = params.first_coefficient();
    let mut out = vec![0.0; n_windows * w];

    // Windows made of one repeated value, found from run lengths.
    let mut run = vec![1usize; series.len()];
    for i in (0..series.len().saturating_sub(1)).rev() {
        if series[i] == series[i + 1] {
            run[i] = run[i + 1] + 1;
        }
    }
    let centre = series.iter().sum::<f64>() / series.len() as f64;
    let (mut s1, mut s2) = (0.0, 0.0);
    for &x in &series[..l] {
        let d = x - centre;
        s1 += d;
        s2 += d * d;
    }
    let mut spreads = Vec::with_capacity(n_windows);
    for t in 0..n_windows {
        if t > 0 {
            let (old, new) = (series[t - 1] - centre, series[t + l - 1] - centre);
            s1 += new - old;
            s2 += new * new - old * old;
        }
        if run[t] >= l {
            spreads.push(None);
        } else {
            let m = s1 / l as f64;
            spreads.push(Some((s2 / l as f64 - m * m).max(0.0).sqrt()));
        }
    }

    for c in 0..w / 2 {
        let k = k0 + c;
        let (mut re, mut im) = (0.0, 0.0);
        for (j, &x) in series[..l].iter().enumerate() {
            let angle = -2.0 * PI * ((k * j) % l) as f64 / l as f64;
            re += x * angle.cos();
            im += x * angle.sin();
        }
        let angle = 2.0 * PI * k as f64 / l as f64;
        let (tc, ts) = (angle.cos(), angle.sin());
        for t in 0..n_windows {
            if t > 0 {
                let r = re - series[t - 1] + series[t + l - 1];
                let i = im;
                re = r * tc - i * ts;
                im = r * ts + i * tc;
            }
            let scale = match (params.normalize_windows, spreads[t]) {
                (false, _) => 1.0,
                (true, None) => 0.0,
                (true, Some(sd)) if sd > 0.0 => 1.0 / sd,
                (true, Some(_)) => 0.0,
            };
            out[t * w + 2 * c] = re * scale;
            out[t * w + 2 * c + 1] = im * scale;
        }
    }
    out
}

/// Per-coefficient quantile bin edges learnt from training windows.
#[derive(Clone, Debug, PartialEq)]
pub struct SfaBins {
    params: BossParams,
    edges: Vec<Vec<f64>>,
}

/// Edges `sorted[floor(j * n / alphabet)]` for `j = 1..alphabet`.
fn quantile_edges(mut column: Vec<f64>, alphabet: usize) -> Vec<f64> {
    column.sort_by(f64::total_cmp);
    let n = column.len();
    (1..alphabet).map(|j| column[j * n / alphabet]).collect()
}

impl SfaBins {
    /// Multiple Coefficient Binning over every window of every series.
    pub fn train(series: &[&[f64]], params: &BossParams) -> Result<Self> {
        let len = series.first().map(|s| s.len()).ok_or_else(|| Error::validation("no series to train bins on"))?;
        params.validate(len)?;
        let coefs: Vec<Vec<f64>> = series.iter().map(|s| sliding_coefficients(s, params)).collect();
        Ok(Self::from_coefficients(&coefs, params))
    }

    fn from_coefficients(coefs: &[Vec<f64>], params: &BossParams) -> Self {
        let w = params.word_len;
        let edges = (0..w)
            .map(|c| {
                let column: Vec<f64> = coefs.iter().flat_map(|m| m.iter().skip(c).step_by(w).copied()).collect();
                quantile_edges(column, params.alphabet)
            })
            .collect();
        Self { params: *params, edges }
    }

    pub fn params(&self) -> &BossParams {
        &self.params
    }

    pub fn edges(&self) -> &[Vec<f64>] {
        &self.edges
    }

    fn word_of(&self, slots: &[f64]) -> u64 {
        let a = self.params.alphabet as u64;
        slots.iter().zip(&self.edges).fold(0u64, |word, (&v, edges)| {
            let symbol = edges.iter().filter(|&&e| e <= v).count() as u64;
            word * a + symbol
        })
    }
}

/// Symbols of a word, most significant first.
pub fn word_symbols(word: u64, params: &BossParams) -> Vec<usize> {
    let a = params.alphabet as u64;
    let mut out = vec![0; params.word_len];
    let mut rest = word;
    for s in out.iter_mut().rev() {
        *s = (rest % a) as usize;
        rest /= a;
    }
    out
}

/// SFA word of one window of length `window_len`.
pub fn sfa_word(window: &[f64], bins: &SfaBins) -> Result<u64> {
    if window.len() != bins.params.window_len {
        return Err(Error::dimension(bins.params.window_len, window.len()));
    }
    Ok(bins.word_of(&sfa_coefficients(window, &bins.params)))
}

/// Word counts, sorted by word.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct WordHistogram {
    entries: Vec<(u64, u32)>,
}

impl WordHistogram {
    pub fn from_words(mut words: Vec<u64>) -> Self {
        words.sort_unstable();
        let mut entries: Vec<(u64, u32)> = Vec::new();
        for w in words {
            match entries.last_mut() {
                Some((last, n)) if *last == w => *n += 1,
                _ => entries.push((w, 1)),
            }
        }
        Self { entries }
    }

    pub fn get(&self, word: u64) -> u32 {
        self.entries.binary_search_by_key(&word, |e| e.0).map_or(0, |i| self.entries[i].1)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn total(&self) -> u64 {
        self.entries.iter().map(|e| u64::from(e.1)).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u64, u32)> + '_ {
        self.entries.iter().copied()
    }
}

fn histogram_from_coefficients(coefs: &[f64], bins: &SfaBins) -> WordHistogram {
    let mut words = Vec::with_capacity(coefs.len() / bins.params.word_len);
    let mut last = None;
    for slots in coefs.chunks_exact(bins.params.word_len) {
        let word = bins.word_of(slots);
        if bins.params.numerosity_reduction && last == Some(word) {
            continue;
        }
        last = Some(word);
        words.push(word);
    }
    WordHistogram::from_words(words)
}

/// Histogram of the words of every stride-1 window.
pub fn boss_transform(series: &[f64], bins: &SfaBins) -> Result<WordHistogram> {
    if series.len() < bins.params.window_len {
        return Err(Error::validation(format!(
            "series of length {} is shorter than the window ({})",
            series.len(),
            bins.params.window_len
        )));
    }
    Ok(histogram_from_coefficients(&sliding_coefficients(series, &bins.params), bins))
}

/// `sum over words w of a: (a[w] - b[w])^2`; not symmetric.
pub fn boss_distance(a: &WordHistogram, b: &WordHistogram) -> f64 {
    let mut total = 0u64;
    let mut j = 0;
    for &(word, n) in &a.entries {
        while j < b.entries.len() && b.entries[j].0 < word {
            j += 1;
        }
        let m = if j < b.entries.len() && b.entries[j].0 == word { b.entries[j].1 } else { 0 };
        let d = i64::from(n) - i64::from(m);
        total += (d * d) as u64;
    }
    total as f64
}

/// One fitted BOSS: bins, training histograms and labels.
#[derive(Clone, Debug)]
struct BossMember {
    bins: SfaBins,
    histograms: Vec<WordHistogram>,
    labels: Vec<Label>,
}

impl BossMember {
    fn fit(train: &[&LabeledInstance], params: &BossParams) -> Result<Self> {
        let len = train[0].len();
        params.validate(len)?;
        let coefs: Vec<Vec<f64>> = train.iter().map(|i| sliding_coefficients(i.values(), params)).collect();
        let bins = SfaBins::from_coefficients(&coefs, params);
        let histograms = coefs.iter().map(|c| histogram_from_coefficients(c, &bins)).collect();
        Ok(Self { bins, histograms, labels: train.iter().map(|i| i.label()).collect() })
    }

    /// Label of the nearest training histogram, skipping `exclude`; ties go
    /// to the smaller index.
    fn nearest_label(&self, query: &WordHistogram, exclude: Option<usize>) -> Label {
        let mut best = (f64::INFINITY, 0);
        for (i, h) in self.histograms.iter().enumerate() {
            if Some(i) == exclude {
                continue;
            }
            let d = boss_distance(query, h);
            if d < best.0 {
                best = (d, i);
            }
        }
        self.labels[best.1]
    }

    fn predict(&self, values: &[f64]) -> Label {
        let h = boss_transform(values, &self.bins).expect("length checked by the classifier");
        self.nearest_label(&h, None)
    }

    fn loo_accuracy(&self) -> f64 {
        let n = self.histograms.len();
        if n < 2 {
            return 0.0;
        }
        let correct = (0..n).filter(|&i| self.nearest_label(&self.histograms[i], Some(i)) == self.labels[i]).count();
        correct as f64 / n as f64
    }
}

#[derive(Debug)]
struct BossModel {
    member: BossMember,
}

impl Model for BossModel {
    fn score(&self, values: &[f64]) -> f64 {
        f64::from(self.member.predict(values))
    }
}

/// Single BOSS with 1-NN under [`boss_distance`].
pub fn fit_boss(train: &[LabeledInstance], params: &BossParams, seed: u64) -> Result<FittedClassifier> {
    let len = check_train(train, BOSS_MIN_WINDOW)?;
    let refs: Vec<&LabeledInstance> = train.iter().collect();
    let member = BossMember::fit(&refs, params)?;
    Ok(FittedClassifier::new(ClassifierKind::Boss, seed, len, BossModel { member }))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EnsembleMode {
    /// Grid search with accuracy-based retention.
    Full,
    /// Randomly sampled members on train subsamples, weighted by accuracy to
    /// the fourth power.
    Compact,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleParams {
    pub retention_factor: f64,
    pub window_grid: usize,
    pub word_lens: Vec<usize>,
    pub alphabet: usize,
    pub max_members: usize,
    pub subsample: f64,
}

impl Default for EnsembleParams {
    fn default() -> Self {
        Self {
            retention_factor: 0.92,
            window_grid: 10,
            word_lens: vec![16, 14, 12, 10, 8],
            alphabet: 4,
            max_members: 50,
            subsample: 0.7,
        }
    }
}

/// `count` evenly spaced window lengths in `[10, len]`, deduplicated.
pub fn window_grid(len: usize, count: usize) -> Vec<usize> {
    if len < BOSS_MIN_WINDOW {
        return Vec::new();
    }
    let span = (len - BOSS_MIN_WINDOW) as f64;
    let mut out: Vec<usize> = (0..count.max(1))
        .map(|i| {
            let f = if count > 1 { i as f64 / (count - 1) as f64 } else { 0.0 };
            BOSS_MIN_WINDOW + (f * span).round() as usize
        })
        .collect();
    out.dedup();
    out
}

fn candidate_params(len: usize, p: &EnsembleParams) -> Vec<BossParams> {
    let mut out = Vec::new();
    for normalize_windows in [true, false] {
        for &window_len in &window_grid(len, p.window_grid) {
            for &word_len in &p.word_lens {
                let params = BossParams {
                    window_len,
                    word_len,
                    alphabet: p.alphabet,
                    normalize_windows,
                    numerosity_reduction: true,
                };
                if params.validate(len).is_ok() {
                    out.push(params);
                }
            }
        }
    }
    out
}

#[derive(Debug)]
struct EnsembleMember {
    member: BossMember,
    accuracy: f64,
    weight: f64,
}

#[derive(Debug)]
struct BossEnsembleModel {
    members: Vec<EnsembleMember>,
}

impl Model for BossEnsembleModel {
    fn score(&self, values: &[f64]) -> f64 {
        let total: f64 = self.members.iter().map(|m| m.weight).sum();
        let positive =
            self.members.iter().filter(|m| m.member.predict(values) == 1).fold(0.0, |acc, m| acc + m.weight);
        positive / total
    }

    fn members(&self) -> usize {
        self.members.len()
    }
}

pub fn fit_boss_ensemble(
    train: &[LabeledInstance],
    mode: EnsembleMode,
    params: &EnsembleParams,
    seed: u64,
    deadline: &Deadline,
) -> Result<FittedClassifier> {
    let (model, len) = build_ensemble(train, mode, params, seed, deadline)?;
    let kind = match mode {
        EnsembleMode::Full => ClassifierKind::BossEnsemble,
        EnsembleMode::Compact => ClassifierKind::CBoss,
    };
    Ok(FittedClassifier::new(kind, seed, len, model))
}

fn build_ensemble(
    train: &[LabeledInstance],
    mode: EnsembleMode,
    params: &EnsembleParams,
    seed: u64,
    deadline: &Deadline,
) -> Result<(BossEnsembleModel, usize)> {
    let len = check_train(train, BOSS_MIN_WINDOW)?;
    let mut candidates = candidate_params(len, params);
    if candidates.is_empty() {
        return Err(Error::validation(format!("no BOSS member can be trained on series of length {len}")));
    }
    let all: Vec<&LabeledInstance> = train.iter().collect();
    let members = match mode {
        EnsembleMode::Full => {
            let fitted = candidates
                .par_iter()
                .map(|p| {
                    deadline.check()?;
                    let member = BossMember::fit(&all, p)?;
                    let accuracy = member.loo_accuracy();
                    Ok(EnsembleMember { member, accuracy, weight: 1.0 })
                })
                .collect::<Result<Vec<_>>>()?;
            let best = fitted.iter().map(|m| m.accuracy).fold(0.0, f64::max);
            fitted.into_iter().filter(|m| m.accuracy >= params.retention_factor * best).collect::<Vec<_>>()
        }
        EnsembleMode::Compact => {
            candidates.shuffle(&mut rng::named_stream(seed, "cboss-params", 0));
            candidates.truncate(params.max_members.max(1));
            let take = ((params.subsample * all.len() as f64).round() as usize).clamp(1, all.len());
            let mut fitted = candidates
                .par_iter()
                .enumerate()
                .map(|(i, p)| {
                    deadline.check()?;
                    let mut rng = rng::named_stream(seed, "cboss-subsample", i as u64);
                    let mut picked = rand::seq::index::sample(&mut rng, all.len(), take).into_vec();
                    picked.sort_unstable();
                    let sample: Vec<&LabeledInstance> = picked.into_iter().map(|j| all[j]).collect();
                    let member = BossMember::fit(&sample, p)?;
                    let accuracy = member.loo_accuracy();
                    Ok(EnsembleMember { member, accuracy, weight: accuracy.powi(4) })
                })
                .collect::<Result<Vec<_>>>()?;
            if fitted.iter().all(|m| m.weight == 0.0) {
                fitted.iter_mut().for_each(|m| m.weight = 1.0);
            }
            fitted.retain(|m| m.weight > 0.0);
            fitted
        }
    };
    Ok((BossEnsembleModel { members }, len))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::TimeSeries;
    use chrono::{TimeZone, Utc};
    use rand::Rng;

    fn random_series(len: usize, seed: u64) -> Vec<f64> {
        let mut r = rng::stream(seed, 5);
        (0..len).map(|_| r.random_range(0.0..100.0)).collect()
    }

    fn inst(values: Vec<f64>, label: Label) -> LabeledInstance {
        let s = TimeSeries::from_dense(Utc.with_ymd_and_hms(2014, 1, 1, 0, 0, 0).unwrap(), 60, values, "h").unwrap();
        LabeledInstance::new(s, label, "c").unwrap()
    }

    #[test]
    fn params_validation() {
        assert!(BossParams::default().validate(48).is_ok());
        assert!(BossParams::default().validate(9).is_err());
        assert!(BossParams { word_len: 3, ..BossParams::default() }.validate(48).is_err());
        assert!(BossParams { alphabet: 1, ..BossParams::default() }.validate(48).is_err());
        assert!(BossParams { word_len: 12, ..BossParams::default() }.validate(48).is_err());
    }

    #[test]
    fn sliding_matches_direct_coefficients() {
        let x = random_series(200, 1);
        for normalize_windows in [true, false] {
            let p = BossParams { window_len: 24, word_len: 8, normalize_windows, ..BossParams::default() };
            let sliding = sliding_coefficients(&x, &p);
            for t in 0..=200 - 24 {
                let direct = sfa_coefficients(&x[t..t + 24], &p);
                for (a, b) in sliding[t * 8..(t + 1) * 8].iter().zip(&direct) {
                    assert!((a - b).abs() < 1e-9 * b.abs().max(1.0), "window {t}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn bins_are_sort_quantiles() {
        let series: Vec<Vec<f64>> = (0..6).map(|s| random_series(60, s)).collect();
        let refs: Vec<&[f64]> = series.iter().map(|s| s.as_slice()).collect();
        let p = BossParams { alphabet: 4, ..BossParams::default() };
        let bins = SfaBins::train(&refs, &p).unwrap();
        for c in 0..p.word_len {
            let mut column: Vec<f64> = Vec::new();
            for s in &series {
                let coefs = sliding_coefficients(s, &p);
                column.extend(coefs.chunks(p.word_len).map(|slots| slots[c]));
            }
            column.sort_by(f64::total_cmp);
            let n = column.len();
            let oracle: Vec<f64> = (1..4).map(|j| column[j * n / 4]).collect();
            assert_eq!(bins.edges()[c], oracle);
        }
    }

    #[test]
    fn binary_alphabet_words() {
        let series: Vec<Vec<f64>> = (0..4).map(|s| random_series(50, s)).collect();
        let refs: Vec<&[f64]> = series.iter().map(|s| s.as_slice()).collect();
        let p = BossParams::default();
        let bins = SfaBins::train(&refs, &p).unwrap();
        let w = &series[0][3..13];
        let word = sfa_word(w, &bins).unwrap();
        assert!(word_symbols(word, &p).iter().all(|&s| s < 2));
        assert_eq!(word, sfa_word(w, &bins).unwrap());
        assert!(word < 1 << 10);
        assert!(sfa_word(&series[0][..9], &bins).is_err());
    }

    #[test]
    fn histogram_counts() {
        let series: Vec<Vec<f64>> = (0..4).map(|s| random_series(80, s)).collect();
        let refs: Vec<&[f64]> = series.iter().map(|s| s.as_slice()).collect();
        let p = BossParams { numerosity_reduction: false, ..BossParams::default() };
        let bins = SfaBins::train(&refs, &p).unwrap();
        for s in &series {
            assert_eq!(boss_transform(s, &bins).unwrap().total(), (80 - 10 + 1) as u64);
        }

        let p = BossParams::default();
        let bins = SfaBins::train(&refs, &p).unwrap();
        let h = boss_transform(&[7.25; 40], &bins).unwrap();
        assert_eq!((h.len(), h.total()), (1, 1));
        assert!(boss_transform(&[1.0; 9], &bins).is_err());
    }

    #[test]
    fn histogram_matches_recount() {
        let train: Vec<Vec<f64>> = (0..5).map(|s| random_series(100, s)).collect();
        let refs: Vec<&[f64]> = train.iter().map(|s| s.as_slice()).collect();
        for reduction in [true, false] {
            let p = BossParams { numerosity_reduction: reduction, alphabet: 3, word_len: 6, ..BossParams::default() };
            let bins = SfaBins::train(&refs, &p).unwrap();
            for seed in 100..110 {
                let q = random_series(100, seed);
                let mut words = Vec::new();
                for t in 0..=q.len() - p.window_len {
                    let w = sfa_word(&q[t..t + p.window_len], &bins).unwrap();
                    if !(reduction && words.last() == Some(&w)) {
                        words.push(w);
                    }
                }
                let mut oracle = std::collections::BTreeMap::new();
                for w in words {
                    *oracle.entry(w).or_insert(0u32) += 1;
                }
                let h = boss_transform(&q, &bins).unwrap();
                assert_eq!(h.iter().collect::<Vec<_>>(), oracle.into_iter().collect::<Vec<_>>());
            }
        }
    }

    #[test]
    fn distance_examples() {
        let (x, y) = (1, 2);
        let a = WordHistogram::from_words(vec![x, x]);
        let b = WordHistogram::from_words(vec![x, y, y, y]);
        assert_eq!(boss_distance(&a, &b), 1.0);
        assert_eq!(boss_distance(&b, &a), 10.0);
        assert_eq!(boss_distance(&a, &a), 0.0);
    }

    fn step_data(n: usize, seed: u64) -> Vec<LabeledInstance> {
        let mut r = rng::stream(seed, 8);
        (0..n)
            .map(|i| {
                let label = (i % 2) as Label;
                let mut v: Vec<f64> = (0..48).map(|_| 100.0 + r.random_range(0.0..20.0)).collect();
                if label == 1 {
                    let at = r.random_range(0..44);
                    v[at..at + 3].iter_mut().for_each(|x| *x += 2000.0);
                }
                inst(v, label)
            })
            .collect()
    }

    #[test]
    fn boss_recognises_its_training_series() {
        let train = step_data(30, 1);
        let m = fit_boss(&train, &BossParams::default(), 0).unwrap();
        for t in &train {
            assert_eq!(m.predict_values(t.values()).unwrap(), t.label());
        }
        let again = fit_boss(&train, &BossParams::default(), 0).unwrap();
        let test = step_data(20, 2);
        assert_eq!(m.predict_batch(&test).unwrap(), again.predict_batch(&test).unwrap());
    }

    #[test]
    fn ensemble_retention_and_size() {
        let train = step_data(40, 3);
        let p = EnsembleParams::default();
        let (full, _) = build_ensemble(&train, EnsembleMode::Full, &p, 1, &Deadline::none()).unwrap();
        let best = full.members.iter().map(|m| m.accuracy).fold(0.0, f64::max);
        assert!(full.members.iter().all(|m| m.accuracy >= 0.92 * best));
        assert!(full.members.iter().all(|m| m.member.bins.params().alphabet == 4));

        let small = EnsembleParams { max_members: 5, ..EnsembleParams::default() };
        let (compact, _) = build_ensemble(&train, EnsembleMode::Compact, &small, 1, &Deadline::none()).unwrap();
        assert!(!compact.members.is_empty() && compact.members.len() <= 5);
        assert!(compact.members.iter().all(|m| m.weight == m.accuracy.powi(4) || m.weight == 1.0));
    }

    #[test]
    fn window_grid_spans_the_series() {
        assert_eq!(window_grid(48, 10), vec![10, 14, 18, 23, 27, 31, 35, 40, 44, 48]);
        assert_eq!(window_grid(12, 10), vec![10, 11, 12]);
        assert!(window_grid(9, 10).is_empty());
    }
}
