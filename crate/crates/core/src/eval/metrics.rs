// SPDX-License-Identifier: Apache-2.0

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::ml::TROJAN;

/// Confusion counts and derived rates; zero denominators give zero.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

impl Metrics {
    pub fn from_counts(tp: usize, fp: usize, tn: usize, fn_: usize) -> Self {
        let (t, f, n, m) = (tp as f64, fp as f64, tn as f64, fn_ as f64);
        let precision = ratio(t, t + f);
        let recall = ratio(t, t + m);
        Metrics {
            tp,
            fp,
            tn,
            fn_,
            accuracy: ratio(t + n, t + n + f + m),
            precision,
            recall,
            f1: ratio(2.0 * precision * recall, precision + recall),
        }
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    /// Pooled counts of both operands.
    pub fn merge(&self, other: &Metrics) -> Metrics {
        Metrics::from_counts(
            self.tp + other.tp,
            self.fp + other.fp,
            self.tn + other.tn,
            self.fn_ + other.fn_,
        )
    }
}

/// Counts with `TROJAN` as the positive class.
pub fn compute_metrics(predicted: &[usize], truth: &[usize]) -> Result<Metrics, EvalError> {
    if predicted.len() != truth.len() {
        return Err(EvalError::LengthMismatch {
            predicted: predicted.len(),
            truth: truth.len(),
        });
    }
    let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
    for (&p, &t) in predicted.iter().zip(truth) {
        match (p == TROJAN, t == TROJAN) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, false) => tn += 1,
            (false, true) => fn_ += 1,
        }
    }
    Ok(Metrics::from_counts(tp, fp, tn, fn_))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect() {
        let m = compute_metrics(&[1, 0, 1], &[1, 0, 1]).unwrap();
        assert_eq!((m.accuracy, m.precision, m.recall, m.f1), (1.0, 1.0, 1.0, 1.0));
    }

    #[test]
    fn hand_counts() {
        let m = Metrics::from_counts(3, 1, 4, 2);
        assert_eq!(m.precision, 0.75);
        assert_eq!(m.recall, 0.6);
        assert!((m.f1 - 2.0 * 0.75 * 0.6 / 1.35).abs() < 1e-15);
        assert_eq!(m.accuracy, 0.7);
    }

    #[test]
    fn all_negative() {
        let m = compute_metrics(&[0, 0, 0], &[1, 0, 1]).unwrap();
        assert_eq!((m.precision, m.recall, m.f1), (0.0, 0.0, 0.0));
        assert!(matches!(
            compute_metrics(&[0], &[0, 1]),
            Err(EvalError::LengthMismatch { predicted: 1, truth: 2 })
        ));
    }
}
