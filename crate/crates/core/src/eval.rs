//! Detection metrics and timing.
//!
//! Class 1 (appliance present) is the positive class. Precision, recall and
//! F1 define every 0/0 ratio as 0, so degenerate predictors are penalised.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::Label;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
}

impl Confusion {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }

    /// The same counts with class 0 taken as positive.
    pub fn swapped(&self) -> Confusion {
        Confusion { tp: self.tn, fp: self.fn_, fn_: self.fp, tn: self.tp }
    }

    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn f1(&self) -> f64 {
        let (p, r) = (self.precision(), self.recall());
        if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn confusion(y_true: &[Label], y_pred: &[Label]) -> Result<Confusion> {
    if y_true.len() != y_pred.len() {
        return Err(Error::dimension(y_true.len(), y_pred.len()));
    }
    let mut c = Confusion::default();
    for (i, (&t, &p)) in y_true.iter().zip(y_pred).enumerate() {
        match (t, p) {
            (1, 1) => c.tp += 1,
            (0, 1) => c.fp += 1,
            (1, 0) => c.fn_ += 1,
            (0, 0) => c.tn += 1,
            _ => return Err(Error::validation(format!("non-binary label at position {i}: ({t}, {p})"))),
        }
    }
    Ok(c)
}

/// `(F1 of class 1, F1 of class 0)`.
pub fn f1_per_class(c: &Confusion) -> (f64, f64) {
    (c.f1(), c.swapped().f1())
}

pub fn macro_f1(y_true: &[Label], y_pred: &[Label]) -> Result<f64> {
    let (pos, neg) = f1_per_class(&confusion(y_true, y_pred)?);
    Ok((pos + neg) / 2.0)
}

/// Runs `op` and returns its result with the elapsed monotonic wall time.
pub fn timed<T>(op: impl FnOnce() -> T) -> (T, f64) {
    let start = Instant::now();
    let out = op();
    (out, start.elapsed().as_secs_f64())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl ClassMetrics {
    fn of(c: &Confusion) -> Self {
        Self { precision: c.precision(), recall: c.recall(), f1: c.f1() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub confusion: Confusion,
    pub positive: ClassMetrics,
    pub negative: ClassMetrics,
    pub macro_f1: f64,
    pub n_test: usize,
    pub ib_ratio: f64,
    pub train_time_s: f64,
    pub infer_time_s: f64,
}

impl EvalReport {
    pub fn new(y_true: &[Label], y_pred: &[Label], train_time_s: f64, infer_time_s: f64) -> Result<Self> {
        if y_true.is_empty() {
            return Err(Error::validation("cannot evaluate on an empty test set"));
        }
        let confusion = confusion(y_true, y_pred)?;
        let positive = ClassMetrics::of(&confusion);
        let negative = ClassMetrics::of(&confusion.swapped());
        Ok(Self {
            confusion,
            positive,
            negative,
            macro_f1: (positive.f1 + negative.f1) / 2.0,
            n_test: y_true.len(),
            ib_ratio: (confusion.tp + confusion.fn_) as f64 / y_true.len() as f64,
            train_time_s: train_time_s.max(0.0),
            infer_time_s: infer_time_s.max(0.0),
        })
    }
}
