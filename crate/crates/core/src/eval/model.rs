// SPDX-License-Identifier: Apache-2.0

use serde::{Deserialize, Serialize};

use super::dataset::Circuit;
use super::{EvalError, Mode, RunConfig};
use crate::features::{fit_pca, node_features, pca_transform, wl_embed, PcaModel, EMBEDDING_DIM};
use crate::graph::CircuitGraph;
use crate::linalg::Matrix;
use crate::localize::PatternLibrary;
use crate::ml::{
    fit_tree, train_gcn, tree_predict, DecisionTreeModel, GcnMode, GcnModel, GraphSample, NormalizedAdjacency,
    Target,
};

/// Per-column standardisation fitted on training nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Scaler {
    /// Columns with no spread keep unit scale.
    pub fn fit<'a>(mats: impl IntoIterator<Item = &'a Matrix>, dim: usize) -> Scaler {
        let mut n = 0usize;
        let mut sum = vec![0.0; dim];
        let mut sq = vec![0.0; dim];
        for m in mats {
            for row in m.iter_rows() {
                n += 1;
                for (j, v) in row.iter().enumerate() {
                    sum[j] += v;
                    sq[j] += v * v;
                }
            }
        }
        let nf = n.max(1) as f64;
        let mean: Vec<f64> = sum.iter().map(|s| s / nf).collect();
        let std = sq
            .iter()
            .zip(&mean)
            .map(|(s, m)| {
                let var = (s / nf - m * m).max(0.0);
                if var.sqrt() > 1e-12 {
                    var.sqrt()
                } else {
                    1.0
                }
            })
            .collect();
        Scaler { mean, std }
    }

    pub fn apply(&self, m: &Matrix) -> Matrix {
        let mut out = m.clone();
        for i in 0..out.rows() {
            for (j, v) in out.row_mut(i).iter_mut().enumerate() {
                *v = (*v - self.mean[j]) / self.std[j];
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum DetectorModel {
    Tree {
        wl_iterations: usize,
        embedding_dim: usize,
        pca: Option<PcaModel>,
        tree: DecisionTreeModel,
    },
    Gg {
        scaler: Scaler,
        gcn: GcnModel,
    },
    Nn {
        scaler: Scaler,
        gcn: GcnModel,
    },
}

impl DetectorModel {
    pub fn mode(&self) -> Mode {
        match self {
            DetectorModel::Tree { .. } => Mode::Tree,
            DetectorModel::Gg { .. } => Mode::Gg,
            DetectorModel::Nn { .. } => Mode::Nn,
        }
    }

    fn tree_input(wl_iterations: usize, dim: usize, pca: Option<&PcaModel>, graph: &CircuitGraph) -> Result<Vec<f64>, EvalError> {
        let emb = wl_embed(graph, wl_iterations, dim);
        Ok(match pca {
            Some(p) => pca_transform(p, &Matrix::from_rows(&[emb.0]))?.row(0).to_vec(),
            None => emb.0,
        })
    }

    /// Circuit-level class probabilities; `None` in node mode.
    pub fn graph_probabilities(&self, graph: &CircuitGraph) -> Result<Option<[f64; 2]>, EvalError> {
        match self {
            DetectorModel::Tree {
                wl_iterations,
                embedding_dim,
                pca,
                tree,
            } => {
                let x = Self::tree_input(*wl_iterations, *embedding_dim, pca.as_ref(), graph)?;
                Ok(Some(tree_predict(tree, &x)?.probabilities))
            }
            DetectorModel::Gg { scaler, gcn } => {
                let x = scaler.apply(node_features(graph).matrix());
                Ok(Some(gcn.graph_probabilities(&NormalizedAdjacency::from_graph(graph), &x)?))
            }
            DetectorModel::Nn { .. } => Ok(None),
        }
    }

    /// Per-node class probabilities; `None` outside node mode.
    pub fn node_probabilities(&self, graph: &CircuitGraph) -> Result<Option<Vec<[f64; 2]>>, EvalError> {
        match self {
            DetectorModel::Nn { scaler, gcn } => {
                let x = scaler.apply(node_features(graph).matrix());
                Ok(Some(gcn.node_probabilities(&NormalizedAdjacency::from_graph(graph), &x)?))
            }
            _ => Ok(None),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainedDetector {
    pub model: DetectorModel,
    /// Trojan signatures of the training circuits (graph-level GCN only).
    pub patterns: Option<PatternLibrary>,
    pub loss_trace: Vec<f64>,
}

/// Fits the model selected by `config.mode` on the given circuits.
pub fn train_detector(config: &RunConfig, train: &[&Circuit]) -> Result<TrainedDetector, EvalError> {
    config.check()?;
    if train.is_empty() {
        return Err(EvalError::EmptyDataset);
    }
    match config.mode {
        Mode::Tree => {
            let rows: Vec<Vec<f64>> = train
                .iter()
                .map(|c| wl_embed(&c.graph, config.wl_iterations, EMBEDDING_DIM).0)
                .collect();
            let y: Vec<usize> = train.iter().map(|c| c.graph_label()).collect();
            let x = Matrix::from_rows(&rows);
            let pca = if config.pca.enabled {
                let k = config.pca.k.min(x.rows().saturating_sub(1)).min(EMBEDDING_DIM);
                Some(fit_pca(&x, k)?)
            } else {
                None
            };
            let xt = match &pca {
                Some(p) => pca_transform(p, &x)?,
                None => x,
            };
            let tree = fit_tree(&xt, &y, config.tree)?;
            Ok(TrainedDetector {
                model: DetectorModel::Tree {
                    wl_iterations: config.wl_iterations,
                    embedding_dim: EMBEDDING_DIM,
                    pca,
                    tree,
                },
                patterns: None,
                loss_trace: Vec::new(),
            })
        }
        Mode::Gg | Mode::Nn => {
            let feats: Vec<Matrix> = train.iter().map(|c| node_features(&c.graph).0).collect();
            let dim = crate::features::NODE_FEATURE_DIM;
            let scaler = Scaler::fit(feats.iter(), dim);
            let samples: Vec<GraphSample> = train
                .iter()
                .zip(&feats)
                .map(|(c, f)| {
                    let target = match config.mode {
                        Mode::Gg => Target::Graph(c.graph_label()),
                        _ => Target::Nodes(c.node_labels()),
                    };
                    GraphSample::new(&c.graph, scaler.apply(f), target)
                })
                .collect();
            let gcn_mode = if config.mode == Mode::Gg { GcnMode::Graph } else { GcnMode::Node };
            let trained = train_gcn(&samples, gcn_mode, &config.train_config())?;
            let (model, patterns) = if config.mode == Mode::Gg {
                let mut lib = PatternLibrary::new(config.tau);
                for c in train.iter().filter(|c| c.is_infected()) {
                    let nodes: Vec<usize> = c
                        .trojan_ids
                        .iter()
                        .filter_map(|id| c.graph.node_by_ref(id))
                        .collect();
                    lib.add_infected(&c.name, &c.graph, &nodes);
                }
                (
                    DetectorModel::Gg {
                        scaler,
                        gcn: trained.model,
                    },
                    Some(lib),
                )
            } else {
                (
                    DetectorModel::Nn {
                        scaler,
                        gcn: trained.model,
                    },
                    None,
                )
            };
            Ok(TrainedDetector {
                model,
                patterns,
                loss_trace: trained.loss_trace,
            })
        }
    }
}
