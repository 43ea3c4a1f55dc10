// SPDX-License-Identifier: Apache-2.0

use super::gcn::{loss_and_grad, GcnModel, GraphSample, LossKind, Target};
use super::MlError;
use crate::graph::CircuitGraph;
use crate::linalg::Matrix;

const STEP: f64 = 1e-5;

fn sample(graph: &CircuitGraph, x: &Matrix, target: &Target) -> GraphSample {
    GraphSample::new(graph, x.clone(), target.clone())
}

/// Backpropagated gradient of `loss` in [`GcnModel::params`] order.
pub fn analytic_gradient(
    model: &GcnModel,
    graph: &CircuitGraph,
    x: &Matrix,
    target: &Target,
    loss: LossKind,
) -> Result<Vec<f64>, MlError> {
    Ok(loss_and_grad(model, &[sample(graph, x, target)], loss)?.1)
}

/// Largest `|g_a − g_n| / max(1e-8, |g_a| + |g_n|)` over all parameters, with
/// `g_n` the central difference at step `1e-5`.
pub fn grad_check(
    model: &GcnModel,
    graph: &CircuitGraph,
    x: &Matrix,
    target: &Target,
    loss: LossKind,
) -> Result<f64, MlError> {
    let samples = [sample(graph, x, target)];
    let (_, analytic) = loss_and_grad(model, &samples, loss)?;
    let base = model.params();
    let mut probe = model.clone();
    let mut params = base.clone();
    let mut worst = 0.0f64;
    for i in 0..base.len() {
        params[i] = base[i] + STEP;
        probe.set_params(&params);
        let plus = loss_and_grad(&probe, &samples, loss)?.0;
        params[i] = base[i] - STEP;
        probe.set_params(&params);
        let minus = loss_and_grad(&probe, &samples, loss)?.0;
        params[i] = base[i];
        let numeric = (plus - minus) / (2.0 * STEP);
        let ga = analytic[i];
        let err = (ga - numeric).abs() / (ga.abs() + numeric.abs()).max(1e-8);
        worst = worst.max(err);
    }
    Ok(worst)
}
