//! Transductive labeling of an unlabeled target domain jointly with an
//! asymmetric source/target similarity.
//!
//! Training alternates two steps over sampled batches:
//!
//! - **transduction**: label the target batch by minimizing a Potts energy
//!   whose unary terms come from the learned similarity to labeled source
//!   points and whose pairwise terms live on a cosine k-NN graph of the
//!   target batch (solved with alpha-beta swap moves);
//! - **adaptation**: given those labels, take AdaGrad steps on a triplet
//!   hinge loss over the bilinear similarity `s_W(a, b) = Φ(a)ᵀ W Φ(b)` and,
//!   optionally, over the parameters of the feature map `Φ`.
//!
//! The [`cli`] module wires everything into the `transda` binary.

pub mod cli;
pub mod datamodel;
pub mod error;
pub mod features;
pub mod graph;
pub mod metric;
pub mod trainer;
pub mod transduction;

pub use datamodel::{Checkpoint, SourceDataset, TargetDataset};
pub use error::{Error, Result};
pub use features::{Architecture, FeatureFunction};
pub use graph::KnnGraph;
pub use metric::{MetricMatrix, Triplet};
pub use trainer::{evaluate, train, EvalMode, TrainConfig, TrainReport};
pub use transduction::{EnergyModel, LabelAssignment};
