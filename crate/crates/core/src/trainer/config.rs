use crate::error::{Error, Result};
use crate::features::{ArchKind, Architecture};

/// Hyperparameters of a training run. The CLI flags mirror these fields and
/// take their defaults from [`TrainConfig::default`].
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    /// Hinge margin α.
    pub margin: f64,
    /// Potts weight λ of the label-consistency term.
    pub lambda: f64,
    pub knn_k: usize,
    pub learning_rate: f64,
    pub max_iters: usize,
    pub seed: u64,
    pub arch: ArchKind,
    /// Requested output width; see [`TrainConfig::architecture`].
    pub d_out: usize,
    /// Hidden width of `mlp1`.
    pub d_hidden: usize,
    /// Weight of the `½‖W‖_F²` regularizer.
    pub lambda_w: f64,
    pub label_propagation: bool,
    pub feature_learning: bool,
    pub adagrad_epsilon: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 256,
            margin: 0.5,
            lambda: crate::transduction::DEFAULT_LAMBDA,
            knn_k: crate::graph::DEFAULT_K,
            learning_rate: 2.5e-4,
            max_iters: 2000,
            seed: 0,
            arch: ArchKind::Linear,
            d_out: 128,
            d_hidden: 64,
            lambda_w: 1e-4,
            label_propagation: true,
            feature_learning: true,
            adagrad_epsilon: 1e-8,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.batch_size < 2 {
            return fail(format!("batch size must be >= 2, got {}", self.batch_size));
        }
        if !(self.margin >= 0.0 && self.margin.is_finite()) {
            return fail(format!("margin must be >= 0, got {}", self.margin));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return fail(format!("lambda must be >= 0, got {}", self.lambda));
        }
        if !(self.lambda_w >= 0.0 && self.lambda_w.is_finite()) {
            return fail(format!("lambda_w must be >= 0, got {}", self.lambda_w));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return fail(format!("learning rate must be > 0, got {}", self.learning_rate));
        }
        if !(self.adagrad_epsilon >= 0.0 && self.adagrad_epsilon.is_finite()) {
            return fail(format!("adagrad epsilon must be >= 0, got {}", self.adagrad_epsilon));
        }
        if self.knn_k == 0 {
            return fail("knn k must be >= 1".into());
        }
        if self.d_out == 0 || (self.arch == ArchKind::Mlp1 && self.d_hidden == 0) {
            return fail("feature dimensions must be positive".into());
        }
        Ok(())
    }

    /// Resolves the feature architecture for inputs of width `d_in`.
    ///
    /// `precomputed` keeps `d_in`. A `linear` map has rank at most `d_in`,
    /// so its output width is capped at `d_in`. `mlp1` uses `d_out` as given.
    pub fn architecture(&self, d_in: usize) -> Result<Architecture> {
        let arch = match self.arch {
            ArchKind::Precomputed => Architecture::Precomputed { dim: d_in },
            ArchKind::Linear => Architecture::Linear {
                d_in,
                d_out: self.d_out.min(d_in),
            },
            ArchKind::Mlp1 => Architecture::Mlp1 {
                d_in,
                d_hidden: self.d_hidden,
                d_out: self.d_out,
            },
        };
        Architecture::from_parts(arch.kind(), arch.d_in(), arch.d_hidden(), arch.d_out())
    }

    /// `key=value` lines describing every field.
    pub fn describe(&self) -> Vec<(&'static str, String)> {
        vec![
            ("batch_size", self.batch_size.to_string()),
            ("margin", self.margin.to_string()),
            ("lambda", self.lambda.to_string()),
            ("knn_k", self.knn_k.to_string()),
            ("lr", self.learning_rate.to_string()),
            ("iters", self.max_iters.to_string()),
            ("seed", self.seed.to_string()),
            ("arch", self.arch.to_string()),
            ("d_out", self.d_out.to_string()),
            ("d_hidden", self.d_hidden.to_string()),
            ("lambda_w", self.lambda_w.to_string()),
            ("label_propagation", self.label_propagation.to_string()),
            ("feature_learning", self.feature_learning.to_string()),
            ("adagrad_eps", self.adagrad_epsilon.to_string()),
        ]
    }
}
