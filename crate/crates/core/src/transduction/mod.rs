//! Target labeling by Potts energy minimization.
//!
//! The energy of a labeling `y` of the target batch is
//!
//! ```text
//! E(y) = Σ_i unary(i, y_i) + Σ_{(i,j) ∈ edges} c_ij · [y_i ≠ y_j]
//! unary(i, c) = −max_{source j with label c} s_W(x̂_j, x_i)
//! c_ij = λ · w_ij
//! ```
//!
//! where the edges are the symmetrized cosine k-NN graph of the target
//! features, each counted once. Classes with no source point in the batch
//! are not admissible labels.

mod maxflow;
mod swap;

use ndarray::{Array2, ArrayView2};

pub use maxflow::FlowNetwork;
pub use swap::{alpha_beta_swap, solve_swap, SwapSolution};

use crate::error::{Error, Result};
use crate::features::FeatureFunction;
use crate::graph::KnnGraph;
use crate::metric::MetricMatrix;

/// Default Potts weight λ.
pub const DEFAULT_LAMBDA: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairwiseTerm {
    pub a: usize,
    pub b: usize,
    /// Paid when `a` and `b` take different labels.
    pub coefficient: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyModel {
    unary: Array2<f64>,
    admissible: Vec<bool>,
    pairwise: Vec<PairwiseTerm>,
    incident: Vec<Vec<usize>>,
}

impl EnergyModel {
    /// `unary` is `n × K`; entries for non-admissible classes are ignored.
    pub fn new(unary: Array2<f64>, admissible: Vec<bool>, pairwise: Vec<PairwiseTerm>) -> Result<Self> {
        let (n, k) = unary.dim();
        if admissible.len() != k {
            return Err(Error::shape(k, admissible.len(), "admissible class mask"));
        }
        if !admissible.iter().any(|&a| a) {
            return Err(Error::Precondition("no admissible class".into()));
        }
        for ((i, c), &u) in unary.indexed_iter() {
            if admissible[c] && !u.is_finite() {
                return Err(Error::NonFinite(format!("unary({i}, {c}) = {u}")));
            }
        }
        let mut incident = vec![Vec::new(); n];
        for (e, p) in pairwise.iter().enumerate() {
            if p.a >= n || p.b >= n || p.a == p.b {
                return Err(Error::Shape(format!("invalid pairwise term ({}, {})", p.a, p.b)));
            }
            if !p.coefficient.is_finite() {
                return Err(Error::NonFinite(format!("pairwise ({}, {})", p.a, p.b)));
            }
            incident[p.a].push(e);
            incident[p.b].push(e);
        }
        Ok(Self {
            unary,
            admissible,
            pairwise,
            incident,
        })
    }

    /// Builds the model from a `source × target` score matrix, the source
    /// labels, and the target k-NN graph.
    pub fn from_scores(
        scores: ArrayView2<'_, f64>,
        source_labels: &[usize],
        class_count: usize,
        graph: &KnnGraph,
        lambda: f64,
    ) -> Result<Self> {
        let (ns, nt) = scores.dim();
        if source_labels.len() != ns {
            return Err(Error::shape(ns, source_labels.len(), "source labels"));
        }
        if graph.node_count() != nt {
            return Err(Error::shape(nt, graph.node_count(), "graph nodes"));
        }
        if lambda.is_nan() || lambda < 0.0 {
            return Err(Error::Config(format!("lambda must be >= 0, got {lambda}")));
        }
        let mut best = Array2::from_elem((nt, class_count), f64::NEG_INFINITY);
        let mut admissible = vec![false; class_count];
        for (j, &c) in source_labels.iter().enumerate() {
            if c >= class_count {
                return Err(Error::Domain(format!("source label {c} >= class count {class_count}")));
            }
            admissible[c] = true;
            for i in 0..nt {
                let s = scores[(j, i)];
                if s > best[(i, c)] {
                    best[(i, c)] = s;
                }
            }
        }
        let unary = best.mapv(|s| -s);
        let pairwise = graph
            .edges()
            .iter()
            .map(|e| PairwiseTerm {
                a: e.a,
                b: e.b,
                coefficient: lambda * e.weight,
            })
            .collect();
        Self::new(unary, admissible, pairwise)
    }

    pub fn node_count(&self) -> usize {
        self.unary.nrows()
    }

    pub fn class_count(&self) -> usize {
        self.unary.ncols()
    }

    pub fn unary(&self, node: usize, class: usize) -> f64 {
        self.unary[(node, class)]
    }

    pub fn is_admissible(&self, class: usize) -> bool {
        self.admissible.get(class).copied().unwrap_or(false)
    }

    pub fn admissible_classes(&self) -> impl Iterator<Item = usize> + '_ {
        self.admissible.iter().enumerate().filter(|(_, &a)| a).map(|(c, _)| c)
    }

    pub fn pairwise(&self) -> &[PairwiseTerm] {
        &self.pairwise
    }

    pub(crate) fn incident(&self, node: usize) -> impl Iterator<Item = &PairwiseTerm> {
        self.incident[node].iter().map(|&e| &self.pairwise[e])
    }

    pub fn check_labels(&self, labels: &[usize]) -> Result<()> {
        if labels.len() != self.node_count() {
            return Err(Error::shape(self.node_count(), labels.len(), "labeling"));
        }
        if let Some((i, &c)) = labels.iter().enumerate().find(|(_, &c)| !self.is_admissible(c)) {
            return Err(Error::Domain(format!("node {i} has inadmissible label {c}")));
        }
        Ok(())
    }

    pub fn energy(&self, labels: &[usize]) -> Result<f64> {
        self.check_labels(labels)?;
        let unary: f64 = labels.iter().enumerate().map(|(i, &c)| self.unary[(i, c)]).sum();
        let pairwise: f64 = self
            .pairwise
            .iter()
            .filter(|p| labels[p.a] != labels[p.b])
            .map(|p| p.coefficient)
            .sum();
        Ok(unary + pairwise)
    }

    pub fn assign(&self, labels: Vec<usize>) -> Result<LabelAssignment> {
        let energy = self.energy(&labels)?;
        Ok(LabelAssignment { labels, energy })
    }

    /// Independent per-node minimizer of the unary terms; ties go to the
    /// lower class.
    pub fn unary_argmin(&self) -> Vec<usize> {
        (0..self.node_count())
            .map(|i| {
                self.admissible_classes()
                    .fold(None, |best: Option<usize>, c| match best {
                        Some(b) if self.unary[(i, b)] <= self.unary[(i, c)] => Some(b),
                        _ => Some(c),
                    })
                    .expect("at least one admissible class")
            })
            .collect()
    }
}

/// A labeling together with its energy under the model that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelAssignment {
    pub labels: Vec<usize>,
    pub energy: f64,
}

/// Nearest-neighbor rule on a `source × target` score matrix: each target
/// takes the label of its highest-scoring source (lowest index on ties).
pub fn nn_labels_from_scores(scores: ArrayView2<'_, f64>, source_labels: &[usize]) -> Vec<usize> {
    let (ns, nt) = scores.dim();
    (0..nt)
        .map(|i| {
            let mut best = 0;
            for j in 1..ns {
                if scores[(j, i)] > scores[(best, i)] {
                    best = j;
                }
            }
            source_labels[best]
        })
        .collect()
}

/// Nearest-neighbor rule on feature rows under `w`.
pub fn nn_rule(
    w: &MetricMatrix,
    source_features: &Array2<f64>,
    source_labels: &[usize],
    target_features: &Array2<f64>,
) -> Result<Vec<usize>> {
    if source_features.nrows() == 0 || target_features.nrows() == 0 {
        return Err(Error::Precondition("nn rule needs nonempty batches".into()));
    }
    if source_labels.len() != source_features.nrows() {
        return Err(Error::shape(source_features.nrows(), source_labels.len(), "source labels"));
    }
    let scores = w.score_matrix(source_features, target_features)?;
    Ok(nn_labels_from_scores(scores.view(), source_labels))
}

/// Result of labeling one target batch.
#[derive(Debug, Clone, PartialEq)]
pub struct Transduction {
    pub assignment: LabelAssignment,
    /// Energy of the nearest-neighbor initialization.
    pub nn_energy: f64,
    pub model: EnergyModel,
}

/// Labels a batch from precomputed scores and target features.
pub fn transduce_scored(
    scores: ArrayView2<'_, f64>,
    source_labels: &[usize],
    class_count: usize,
    target_features: &Array2<f64>,
    k: usize,
    lambda: f64,
    propagate: bool,
) -> Result<Transduction> {
    if scores.nrows() == 0 || scores.ncols() == 0 {
        return Err(Error::Precondition("transduction needs nonempty batches".into()));
    }
    let graph = KnnGraph::build(target_features, k)?;
    let model = EnergyModel::from_scores(scores, source_labels, class_count, &graph, lambda)?;
    let init = model.assign(nn_labels_from_scores(scores, source_labels))?;
    let nn_energy = init.energy;
    let assignment = if propagate {
        alpha_beta_swap(&model, &init)?
    } else {
        init
    };
    Ok(Transduction {
        assignment,
        nn_energy,
        model,
    })
}

/// Labels a target batch: nearest-neighbor initialization, followed by
/// alpha-beta swap moves when `propagate` is set.
#[allow(clippy::too_many_arguments)]
pub fn transduce_batch(
    w: &MetricMatrix,
    features: &FeatureFunction,
    source_points: &Array2<f64>,
    source_labels: &[usize],
    class_count: usize,
    target_points: &Array2<f64>,
    k: usize,
    lambda: f64,
    propagate: bool,
) -> Result<Transduction> {
    if source_points.nrows() == 0 || target_points.nrows() == 0 {
        return Err(Error::Precondition("transduction needs nonempty batches".into()));
    }
    let sf = features.forward_batch(source_points)?;
    let tf = features.forward_batch(target_points)?;
    let scores = w.score_matrix(&sf, &tf)?;
    transduce_scored(scores.view(), source_labels, class_count, &tf, k, lambda, propagate)
}
