// SPDX-License-Identifier: Apache-2.0

use super::MlError;
use crate::linalg::Matrix;

/// Probabilities are clamped to this floor before taking logs.
pub(crate) const PROB_FLOOR: f64 = 1e-12;

/// Max-shifted softmax.
pub fn softmax(logits: &[f64]) -> Result<Vec<f64>, MlError> {
    if logits.iter().any(|v| !v.is_finite()) {
        return Err(MlError::NonFiniteInput);
    }
    Ok(softmax_unchecked(logits))
}

pub(crate) fn softmax_unchecked(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Class-weighted mean negative log-likelihood:
/// `-(1/Σ w[y_i]) Σ w[y_i] ln p_i[y_i]`.
pub fn cross_entropy(probs: &Matrix, labels: &[usize], class_weights: &[f64]) -> Result<f64, MlError> {
    if probs.rows() != labels.len() {
        return Err(MlError::DimensionMismatch {
            expected: probs.rows(),
            got: labels.len(),
        });
    }
    if class_weights.len() != probs.cols() {
        return Err(MlError::DimensionMismatch {
            expected: probs.cols(),
            got: class_weights.len(),
        });
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for (i, &y) in labels.iter().enumerate() {
        if y >= probs.cols() {
            return Err(MlError::LabelOutOfRange(y));
        }
        let w = class_weights[y];
        num -= w * probs[(i, y)].max(PROB_FLOOR).ln();
        den += w;
    }
    if den == 0.0 {
        return Ok(0.0);
    }
    Ok(num / den)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::LN_2;

    #[test]
    fn softmax_closed_forms() {
        assert_eq!(softmax(&[0.0, 0.0]).unwrap(), vec![0.5, 0.5]);
        let p = softmax(&[0.0, 3f64.ln()]).unwrap();
        assert!((p[0] - 0.25).abs() < 1e-12 && (p[1] - 0.75).abs() < 1e-12);
        assert_eq!(softmax(&[f64::NAN, 0.0]), Err(MlError::NonFiniteInput));
        assert_eq!(softmax(&[f64::INFINITY, 0.0]), Err(MlError::NonFiniteInput));
    }

    #[test]
    fn softmax_large_logits_stay_finite() {
        let p = softmax(&[1000.0, 999.0]).unwrap();
        assert!(p.iter().all(|v| v.is_finite()));
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cross_entropy_closed_forms() {
        let perfect = Matrix::from_rows(&[[1.0, 0.0], [0.0, 1.0]]);
        assert!(cross_entropy(&perfect, &[0, 1], &[1.0, 1.0]).unwrap() <= 1e-11);
        let uniform = Matrix::from_rows(&[[0.5, 0.5], [0.5, 0.5]]);
        assert!((cross_entropy(&uniform, &[0, 1], &[1.0, 1.0]).unwrap() - LN_2).abs() < 1e-15);
        // Weighted mean of two equal terms: (1·ln2 + 3·ln2) / 4.
        assert!((cross_entropy(&uniform, &[0, 1], &[1.0, 3.0]).unwrap() - LN_2).abs() < 1e-15);
        assert!(matches!(
            cross_entropy(&uniform, &[0], &[1.0, 1.0]),
            Err(MlError::DimensionMismatch { .. })
        ));
    }
}
