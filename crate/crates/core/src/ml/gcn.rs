// SPDX-License-Identifier: Apache-2.0

//! Graph convolutional network with a two-class softmax head.
//!
//! Each convolution computes `ReLU(Â · H · W + b)` with
//! `Â = D̂^{-1/2} (A + I) D̂^{-1/2}` over the undirected 0/1 adjacency `A`.
//! Node mode applies the head to every node; graph mode first averages the
//! node representations. Gradients are derived by hand, in `f64`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::loss::{softmax_unchecked, PROB_FLOOR};
use super::optim::Adam;
use super::MlError;
use crate::graph::CircuitGraph;
use crate::linalg::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GcnMode {
    Graph,
    Node,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Readout {
    Mean,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Adam,
    AdamW,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassWeighting {
    Uniform,
    /// `w_c = total / (2 · count_c)` over the training targets.
    InverseFrequency,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub optimizer: OptimizerKind,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Only used by `AdamW`.
    pub weight_decay: f64,
    pub class_weighting: ClassWeighting,
    /// Width of every graph-convolution layer.
    pub hidden: usize,
    pub conv_layers: usize,
    pub seed: u64,
    pub train_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.001,
            epochs: 250,
            optimizer: OptimizerKind::Adam,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            weight_decay: 0.01,
            class_weighting: ClassWeighting::InverseFrequency,
            hidden: 12,
            conv_layers: 2,
            seed: 0,
            train_fraction: 0.8,
        }
    }
}

impl TrainConfig {
    /// Node classification: width 12, 250 epochs.
    pub fn node_default() -> Self {
        TrainConfig::default()
    }

    /// Graph classification: width 16, 200 epochs.
    pub fn graph_default() -> Self {
        TrainConfig {
            hidden: 16,
            epochs: 200,
            ..TrainConfig::default()
        }
    }

    pub fn check(&self) -> Result<(), MlError> {
        if !(self.learning_rate > 0.0) {
            return Err(MlError::InvalidConfig("learning_rate must be positive".into()));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(MlError::InvalidConfig("train_fraction must lie in (0, 1)".into()));
        }
        if self.conv_layers > 0 && self.hidden == 0 {
            return Err(MlError::InvalidConfig("hidden width must be positive".into()));
        }
        Ok(())
    }
}

/// Affine map stored row-major as `rows` (inputs) x `cols` (outputs).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    pub rows: usize,
    pub cols: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl DenseLayer {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseLayer {
            rows,
            cols,
            weights: vec![0.0; rows * cols],
            bias: vec![0.0; cols],
        }
    }

    pub fn weight_matrix(&self) -> Matrix {
        Matrix::from_vec(self.rows, self.cols, self.weights.clone())
    }

    fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    fn affine(&self, h: &Matrix) -> Matrix {
        let mut out = h.matmul(&self.weight_matrix());
        for i in 0..out.rows() {
            for (o, b) in out.row_mut(i).iter_mut().zip(&self.bias) {
                *o += b;
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GcnModel {
    pub mode: GcnMode,
    pub readout: Readout,
    /// Graph convolutions followed by the linear head (last entry).
    pub layers: Vec<DenseLayer>,
    pub config: TrainConfig,
    pub seed: u64,
}

impl GcnModel {
    /// Glorot-uniform weights from `config.seed`, zero biases.
    pub fn init(mode: GcnMode, input_dim: usize, config: &TrainConfig) -> GcnModel {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut dims = vec![input_dim];
        dims.extend(std::iter::repeat(config.hidden).take(config.conv_layers));
        dims.push(2);
        let layers = dims
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let s = (6.0 / (fan_in + fan_out) as f64).sqrt();
                let mut layer = DenseLayer::zeros(fan_in, fan_out);
                for v in &mut layer.weights {
                    *v = rng.gen_range(-s..s);
                }
                layer
            })
            .collect();
        GcnModel {
            mode,
            readout: match mode {
                GcnMode::Graph => Readout::Mean,
                GcnMode::Node => Readout::None,
            },
            layers,
            config: config.clone(),
            seed: config.seed,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].rows
    }

    pub fn conv_layers(&self) -> &[DenseLayer] {
        &self.layers[..self.layers.len() - 1]
    }

    pub fn head(&self) -> &DenseLayer {
        self.layers.last().expect("model has a head layer")
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(DenseLayer::param_count).sum()
    }

    /// Flattened parameters: per layer, weights then bias.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            out.extend_from_slice(&l.weights);
            out.extend_from_slice(&l.bias);
        }
        out
    }

    pub fn set_params(&mut self, params: &[f64]) {
        assert_eq!(params.len(), self.param_count());
        let mut off = 0;
        for l in &mut self.layers {
            let w = l.weights.len();
            l.weights.copy_from_slice(&params[off..off + w]);
            off += w;
            let b = l.bias.len();
            l.bias.copy_from_slice(&params[off..off + b]);
            off += b;
        }
    }

    /// Per-node two-class probabilities.
    pub fn node_probabilities(&self, adj: &NormalizedAdjacency, x: &Matrix) -> Result<Vec<[f64; 2]>, MlError> {
        let fp = forward_adj(self, adj, x)?;
        Ok(fp.node_logits.iter_rows().map(probs2).collect())
    }

    /// Graph-level probabilities from the mean readout.
    pub fn graph_probabilities(&self, adj: &NormalizedAdjacency, x: &Matrix) -> Result<[f64; 2], MlError> {
        let fp = forward_adj(self, adj, x)?;
        let logits = fp.graph_logits.unwrap_or_else(|| mean_rows(&fp.node_logits));
        Ok(probs2(&logits))
    }
}

fn probs2(logits: &[f64]) -> [f64; 2] {
    let p = softmax_unchecked(logits);
    [p[0], p[1]]
}

fn mean_rows(m: &Matrix) -> Vec<f64> {
    m.column_means()
}

/// Sparse `D̂^{-1/2} (A + I) D̂^{-1/2}` in CSR form.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedAdjacency {
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl NormalizedAdjacency {
    pub fn from_graph(graph: &CircuitGraph) -> Self {
        let lists: Vec<&[usize]> = (0..graph.len()).map(|v| graph.adjacent(v)).collect();
        Self::from_lists(&lists)
    }

    /// Each list holds the distinct undirected neighbours of a node, excluding itself.
    pub fn from_lists<L: AsRef<[usize]>>(lists: &[L]) -> Self {
        let deg: Vec<f64> = lists.iter().map(|l| (l.as_ref().len() + 1) as f64).collect();
        let mut row_ptr = vec![0];
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        for (i, l) in lists.iter().enumerate() {
            let mut row: Vec<usize> = l.as_ref().to_vec();
            row.push(i);
            row.sort_unstable();
            for j in row {
                cols.push(j);
                vals.push(1.0 / (deg[i] * deg[j]).sqrt());
            }
            row_ptr.push(cols.len());
        }
        NormalizedAdjacency {
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn len(&self) -> usize {
        self.row_ptr.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `Â · m`; `Â` is symmetric so this also serves for `Âᵀ · m`.
    pub fn apply(&self, m: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(m.rows(), m.cols());
        for i in 0..self.len() {
            let orow = out.row_mut(i);
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let a = self.vals[k];
                for (o, v) in orow.iter_mut().zip(m.row(self.cols[k])) {
                    *o += a * v;
                }
            }
        }
        out
    }

    pub fn to_dense(&self) -> Matrix {
        let n = self.len();
        let mut d = Matrix::zeros(n, n);
        for i in 0..n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                d[(i, self.cols[k])] = self.vals[k];
            }
        }
        d
    }
}

/// Activations kept for backpropagation.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    /// Pre-activation of each convolution.
    pub pre: Vec<Matrix>,
    /// Post-ReLU output of each convolution.
    pub hidden: Vec<Matrix>,
    pub node_logits: Matrix,
    /// Present with the mean readout.
    pub graph_logits: Option<Vec<f64>>,
}

impl ForwardPass {
    fn last_hidden<'a>(&'a self, x: &'a Matrix) -> &'a Matrix {
        self.hidden.last().unwrap_or(x)
    }
}

pub(crate) fn forward_adj(model: &GcnModel, adj: &NormalizedAdjacency, x: &Matrix) -> Result<ForwardPass, MlError> {
    if x.rows() != adj.len() {
        return Err(MlError::DimensionMismatch {
            expected: adj.len(),
            got: x.rows(),
        });
    }
    if x.cols() != model.input_dim() {
        return Err(MlError::DimensionMismatch {
            expected: model.input_dim(),
            got: x.cols(),
        });
    }
    let mut pre = Vec::new();
    let mut hidden: Vec<Matrix> = Vec::new();
    for layer in model.conv_layers() {
        let h = hidden.last().unwrap_or(x);
        let mut z = adj.apply(&h.matmul(&layer.weight_matrix()));
        for i in 0..z.rows() {
            for (o, b) in z.row_mut(i).iter_mut().zip(&layer.bias) {
                *o += b;
            }
        }
        let mut a = z.clone();
        a.as_mut_slice().iter_mut().for_each(|v| *v = v.max(0.0));
        pre.push(z);
        hidden.push(a);
    }
    let h = hidden.last().unwrap_or(x);
    let node_logits = model.head().affine(h);
    let graph_logits = match model.readout {
        Readout::Mean if h.rows() > 0 => {
            let g = Matrix::from_rows(&[mean_rows(h)]);
            Some(model.head().affine(&g).row(0).to_vec())
        }
        Readout::Mean => Some(model.head().bias.clone()),
        Readout::None => None,
    };
    Ok(ForwardPass {
        pre,
        hidden,
        node_logits,
        graph_logits,
    })
}

/// Forward pass over a circuit graph and its feature matrix.
pub fn gcn_forward(model: &GcnModel, graph: &CircuitGraph, x: &Matrix) -> Result<ForwardPass, MlError> {
    forward_adj(model, &NormalizedAdjacency::from_graph(graph), x)
}

/// Training target of one graph.
#[derive(Debug, Clone, PartialEq)]
pub enum Target {
    Graph(usize),
    Nodes(Vec<usize>),
}

#[derive(Debug, Clone)]
pub struct GraphSample {
    pub adjacency: NormalizedAdjacency,
    pub features: Matrix,
    pub target: Target,
}

impl GraphSample {
    pub fn new(graph: &CircuitGraph, features: Matrix, target: Target) -> Self {
        GraphSample {
            adjacency: NormalizedAdjacency::from_graph(graph),
            features,
            target,
        }
    }

    fn labels(&self) -> &[usize] {
        match &self.target {
            Target::Graph(y) => std::slice::from_ref(y),
            Target::Nodes(ys) => ys,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LossKind {
    /// Class-weighted softmax cross-entropy.
    CrossEntropy { class_weights: [f64; 2] },
    /// `½ ‖logits − onehot‖²` averaged over items; used to check gradients.
    SquaredError,
}

/// Loss over the whole batch and its gradient in [`GcnModel::params`] order.
pub(crate) fn loss_and_grad(model: &GcnModel, samples: &[GraphSample], loss: LossKind) -> Result<(f64, Vec<f64>), MlError> {
    let norm: f64 = match loss {
        LossKind::CrossEntropy { class_weights } => samples
            .iter()
            .flat_map(|s| s.labels().iter())
            .map(|&y| class_weights[y])
            .sum(),
        LossKind::SquaredError => samples.iter().map(|s| s.labels().len()).sum::<usize>() as f64,
    };
    let mut grad = vec![0.0; model.param_count()];
    if norm == 0.0 {
        return Ok((0.0, grad));
    }
    let mut total = 0.0;
    for s in samples {
        let fp = forward_adj(model, &s.adjacency, &s.features)?;
        let (logits, graph_level) = match (&s.target, &fp.graph_logits) {
            (Target::Graph(_), Some(g)) => (Matrix::from_rows(&[g.clone()]), true),
            (Target::Nodes(ys), None) if ys.len() == fp.node_logits.rows() => (fp.node_logits.clone(), false),
            _ => {
                return Err(MlError::ShapeMismatch(
                    "sample target does not match the model readout".into(),
                ))
            }
        };
        let mut dlogits = Matrix::zeros(logits.rows(), 2);
        for (i, &y) in s.labels().iter().enumerate() {
            if y > 1 {
                return Err(MlError::LabelOutOfRange(y));
            }
            let z = logits.row(i);
            match loss {
                LossKind::CrossEntropy { class_weights } => {
                    let p = softmax_unchecked(z);
                    let w = class_weights[y] / norm;
                    total -= w * p[y].max(PROB_FLOOR).ln();
                    for c in 0..2 {
                        let onehot = if c == y { 1.0 } else { 0.0 };
                        dlogits[(i, c)] = w * (p[c] - onehot);
                    }
                }
                LossKind::SquaredError => {
                    for c in 0..2 {
                        let onehot = if c == y { 1.0 } else { 0.0 };
                        let d = z[c] - onehot;
                        total += 0.5 * d * d / norm;
                        dlogits[(i, c)] = d / norm;
                    }
                }
            }
        }
        backward(model, s, &fp, &dlogits, graph_level, &mut grad);
    }
    Ok((total, grad))
}

/// Accumulates parameter gradients for one sample into `grad`.
fn backward(model: &GcnModel, s: &GraphSample, fp: &ForwardPass, dlogits: &Matrix, graph_level: bool, grad: &mut [f64]) {
    let offsets: Vec<usize> = model
        .layers
        .iter()
        .scan(0, |acc, l| {
            let o = *acc;
            *acc += l.param_count();
            Some(o)
        })
        .collect();
    let head = model.head();
    let h_last = fp.last_hidden(&s.features);
    let n = h_last.rows();

    // Head.
    let head_in = if graph_level {
        Matrix::from_rows(&[mean_rows(h_last)])
    } else {
        h_last.clone()
    };
    let dw = head_in.t_matmul(dlogits);
    let off = offsets[model.layers.len() - 1];
    for (g, d) in grad[off..off + head.weights.len()].iter_mut().zip(dw.as_slice()) {
        *g += d;
    }
    let boff = off + head.weights.len();
    for i in 0..dlogits.rows() {
        for c in 0..head.cols {
            grad[boff + c] += dlogits[(i, c)];
        }
    }
    let d_in = dlogits.matmul_t(&head.weight_matrix());
    let mut dh = if graph_level {
        let mut m = Matrix::zeros(n, head.rows);
        if n > 0 {
            for i in 0..n {
                for (o, v) in m.row_mut(i).iter_mut().zip(d_in.row(0)) {
                    *o = v / n as f64;
                }
            }
        }
        m
    } else {
        d_in
    };

    // Convolutions, last to first.
    for l in (0..model.layers.len() - 1).rev() {
        let layer = &model.layers[l];
        let mut dz = dh;
        for (d, z) in dz.as_mut_slice().iter_mut().zip(fp.pre[l].as_slice()) {
            if *z <= 0.0 {
                *d = 0.0;
            }
        }
        let dp = s.adjacency.apply(&dz);
        let h_in = if l == 0 { &s.features } else { &fp.hidden[l - 1] };
        let dw = h_in.t_matmul(&dp);
        let off = offsets[l];
        for (g, d) in grad[off..off + layer.weights.len()].iter_mut().zip(dw.as_slice()) {
            *g += d;
        }
        let boff = off + layer.weights.len();
        for i in 0..dz.rows() {
            for (c, d) in dz.row(i).iter().enumerate() {
                grad[boff + c] += d;
            }
        }
        dh = dp.matmul_t(&layer.weight_matrix());
    }
}

#[derive(Debug, Clone)]
pub struct TrainedGcn {
    pub model: GcnModel,
    /// Training loss at each epoch, measured before that epoch's update.
    pub loss_trace: Vec<f64>,
    pub class_weights: [f64; 2],
}

pub(crate) fn resolve_class_weights(samples: &[GraphSample], weighting: ClassWeighting) -> [f64; 2] {
    match weighting {
        ClassWeighting::Uniform => [1.0, 1.0],
        ClassWeighting::InverseFrequency => {
            let mut counts = [0usize; 2];
            for s in samples {
                for &y in s.labels() {
                    if y < 2 {
                        counts[y] += 1;
                    }
                }
            }
            let total = (counts[0] + counts[1]) as f64;
            let w = |c: usize| if c == 0 { 1.0 } else { total / (2.0 * c as f64) };
            [w(counts[0]), w(counts[1])]
        }
    }
}

/// Full-batch training; deterministic for a given seed and sample order.
pub fn train_gcn(samples: &[GraphSample], mode: GcnMode, config: &TrainConfig) -> Result<TrainedGcn, MlError> {
    config.check()?;
    let first = samples.first().ok_or(MlError::EmptyDataset)?;
    let input_dim = first.features.cols();
    for s in samples {
        if s.features.cols() != input_dim {
            return Err(MlError::ShapeMismatch(format!(
                "feature width {} differs from {input_dim}",
                s.features.cols()
            )));
        }
        if s.features.rows() != s.adjacency.len() {
            return Err(MlError::ShapeMismatch("feature rows differ from node count".into()));
        }
        let ok = match (&s.target, mode) {
            (Target::Graph(_), GcnMode::Graph) => true,
            (Target::Nodes(ys), GcnMode::Node) => ys.len() == s.features.rows(),
            _ => false,
        };
        if !ok {
            return Err(MlError::ShapeMismatch("target does not match training mode".into()));
        }
    }
    let class_weights = resolve_class_weights(samples, config.class_weighting);
    let loss = LossKind::CrossEntropy { class_weights };
    let mut model = GcnModel::init(mode, input_dim, config);
    let mut params = model.params();
    let decay = match config.optimizer {
        OptimizerKind::Adam => 0.0,
        OptimizerKind::AdamW => config.weight_decay,
    };
    let mut opt = Adam::new(
        params.len(),
        config.learning_rate,
        config.beta1,
        config.beta2,
        config.epsilon,
        decay,
    );
    let mut loss_trace = Vec::with_capacity(config.epochs);
    for _ in 0..config.epochs {
        let (value, grad) = loss_and_grad(&model, samples, loss)?;
        loss_trace.push(value);
        opt.step(&mut params, &grad);
        model.set_params(&params);
    }
    Ok(TrainedGcn {
        model,
        loss_trace,
        class_weights,
    })
}
