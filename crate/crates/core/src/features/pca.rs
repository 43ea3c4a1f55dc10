// SPDX-License-Identifier: Apache-2.0

use serde::{Deserialize, Serialize};

use super::FeatureError;
use crate::linalg::{dot, symmetric_eigen, Matrix};

/// Principal components of a sample matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// One component per row, unit length.
    pub components: Vec<Vec<f64>>,
    /// Sample-covariance eigenvalue of each component, non-increasing.
    pub explained_variance: Vec<f64>,
    /// Sum of all covariance eigenvalues (the trace).
    #[serde(default)]
    pub total_variance: f64,
}

impl PcaModel {
    pub fn input_dim(&self) -> usize {
        self.mean.len()
    }

    pub fn k(&self) -> usize {
        self.components.len()
    }

    pub fn explained_variance_ratio(&self) -> Vec<f64> {
        if self.total_variance <= 0.0 {
            return vec![0.0; self.k()];
        }
        self.explained_variance
            .iter()
            .map(|v| v / self.total_variance)
            .collect()
    }

    /// Maps projected rows back into input space.
    pub fn inverse_transform(&self, projected: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(projected.rows(), self.input_dim());
        for i in 0..projected.rows() {
            let row = out.row_mut(i);
            row.copy_from_slice(&self.mean);
            for (c, comp) in self.components.iter().enumerate() {
                let z = projected[(i, c)];
                for (o, w) in row.iter_mut().zip(comp) {
                    *o += z * w;
                }
            }
        }
        out
    }
}

/// Top-`k` eigenvectors of the sample covariance (divisor `rows - 1`).
///
/// Each component is oriented so that its largest-magnitude entry (the first
/// one on ties) is positive.
pub fn fit_pca(data: &Matrix, k: usize) -> Result<PcaModel, FeatureError> {
    let (n, d) = (data.rows(), data.cols());
    if n < 2 {
        return Err(FeatureError::DegenerateData(n));
    }
    let limit = (n - 1).min(d);
    if k > limit {
        return Err(FeatureError::KTooLarge { k, limit });
    }
    let mean = data.column_means();
    let mut centred = data.clone();
    for i in 0..n {
        for (v, m) in centred.row_mut(i).iter_mut().zip(&mean) {
            *v -= m;
        }
    }
    let mut cov = centred.t_matmul(&centred);
    cov.as_mut_slice()
        .iter_mut()
        .for_each(|v| *v /= (n - 1) as f64);
    let total_variance = (0..d).map(|i| cov[(i, i)]).sum();

    let (values, vectors) = symmetric_eigen(&cov);
    let mut components = Vec::with_capacity(k);
    for r in 0..k {
        let mut comp = vectors.row(r).to_vec();
        let max_abs = comp.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let pivot = comp
            .iter()
            .position(|v| v.abs() >= max_abs * (1.0 - 1e-9))
            .unwrap_or(0);
        if comp[pivot] < 0.0 {
            comp.iter_mut().for_each(|v| *v = -*v);
        }
        components.push(comp);
    }
    let explained_variance = values[..k].iter().map(|v| v.max(0.0)).collect();
    Ok(PcaModel {
        mean,
        components,
        explained_variance,
        total_variance,
    })
}

/// Projects `(data - mean)` onto the components.
pub fn pca_transform(model: &PcaModel, data: &Matrix) -> Result<Matrix, FeatureError> {
    if data.cols() != model.input_dim() {
        return Err(FeatureError::DimensionMismatch {
            expected: model.input_dim(),
            got: data.cols(),
        });
    }
    let mut out = Matrix::zeros(data.rows(), model.k());
    let mut centred = vec![0.0; data.cols()];
    for i in 0..data.rows() {
        for ((c, v), m) in centred.iter_mut().zip(data.row(i)).zip(&model.mean) {
            *c = v - m;
        }
        for (j, comp) in model.components.iter().enumerate() {
            out[(i, j)] = dot(&centred, comp);
        }
    }
    Ok(out)
}
