//! Classification metrics over confusion counts.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::{round_to, Real};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricsError {
    #[error("confusion matrix is empty")]
    EmptyMatrix,
    #[error("prediction and gold lengths differ ({pred} vs {gold})")]
    LengthMismatch { pred: usize, gold: usize },
}

/// Binary confusion counts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionMatrix {
    pub fn new(tp: u64, fp: u64, fn_: u64, tn: u64) -> Self {
        ConfusionMatrix { tp, fp, fn_, tn }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    /// Count outcomes with `positive` marking the positive class.
    pub fn from_labels<L: PartialEq>(pred: &[L], gold: &[L], positive: &L) -> Result<Self, MetricsError> {
        if pred.len() != gold.len() {
            return Err(MetricsError::LengthMismatch { pred: pred.len(), gold: gold.len() });
        }
        let mut cm = ConfusionMatrix::default();
        for (p, g) in pred.iter().zip(gold) {
            match (p == positive, g == positive) {
                (true, true) => cm.tp += 1,
                (true, false) => cm.fp += 1,
                (false, true) => cm.fn_ += 1,
                (false, false) => cm.tn += 1,
            }
        }
        Ok(cm)
    }

    pub fn metrics<T: Real>(&self) -> Result<Metrics<T>, MetricsError> {
        let total = self.total();
        if total == 0 {
            return Err(MetricsError::EmptyMatrix);
        }
        let (precision, recall, f1) = precision_recall_f1(self.tp, self.fp, self.fn_);
        let accuracy = T::from_count(self.tp + self.tn) / T::from_count(total);
        Ok(Metrics { precision, recall, f1, accuracy })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics<T> {
    pub precision: T,
    pub recall: T,
    pub f1: T,
    pub accuracy: T,
}

impl<T: Real> Metrics<T> {
    pub fn rounded(&self, decimals: i32) -> Metrics<T> {
        Metrics {
            precision: round_to(self.precision, decimals),
            recall: round_to(self.recall, decimals),
            f1: round_to(self.f1, decimals),
            accuracy: round_to(self.accuracy, decimals),
        }
    }
}

fn ratio<T: Real>(num: u64, den: u64) -> T {
    if den == 0 {
        T::zero()
    } else {
        T::from_count(num) / T::from_count(den)
    }
}

/// Precision, recall and F1. Zero denominators yield 0.
pub fn precision_recall_f1<T: Real>(tp: u64, fp: u64, fn_: u64) -> (T, T, T) {
    let p: T = ratio(tp, tp + fp);
    let r: T = ratio(tp, tp + fn_);
    let f1 = if p + r == T::zero() { T::zero() } else { T::lit(2.0) * p * r / (p + r) };
    (p, r, f1)
}
