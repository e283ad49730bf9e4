//! The alternating training loop and full-set evaluation.
//!
//! Each iteration samples a source batch (with labels) and a target batch,
//! labels the target batch by energy minimization, picks one triplet per
//! source point from the transduced labels, and takes an AdaGrad descent
//! step on the triplet loss with respect to `W` and, optionally, θ.

mod adagrad;
mod config;
mod report;

use ndarray::{Array2, Axis};
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use adagrad::{adagrad_step, AdaGradState};
pub use config::TrainConfig;
pub use report::{IterationRecord, TrainReport};

use crate::datamodel::{Checkpoint, SourceDataset, TargetDataset};
use crate::error::{Error, Result};
use crate::features::row_slice;
use crate::metric::{self, Triplet};
use crate::transduction::{self, LabelAssignment};

/// Number of iterations in each of the two windows compared by the
/// convergence test.
pub const CONVERGENCE_WINDOW: usize = 50;
/// Relative change in mean loss below which training stops.
pub const CONVERGENCE_TOLERANCE: f64 = 1e-6;

const SAMPLING_STREAM: u64 = 1;

/// How the full target set is labeled at evaluation time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum EvalMode {
    /// Nearest-neighbor rule only.
    Nn,
    /// Nearest-neighbor rule followed by alpha-beta swap propagation.
    Propagated,
}

/// What one iteration saw, for instrumentation.
#[derive(Debug)]
pub struct BatchTrace<'a> {
    pub iteration: usize,
    pub source_labels: &'a [usize],
    /// Batch features `Φ(x̂)` and `Φ(x)` under the pre-update parameters.
    pub source_features: &'a Array2<f64>,
    pub target_features: &'a Array2<f64>,
    pub nn_labels: &'a [usize],
    pub transduced: &'a LabelAssignment,
    pub nn_energy: f64,
    pub triplets: &'a [Triplet],
    /// Batch positions of sources that formed no triplet.
    pub skipped: &'a [usize],
    pub grad_w: &'a Array2<f64>,
    pub grad_theta: &'a [f64],
}

pub fn train(source: &SourceDataset, target: &TargetDataset, cfg: &TrainConfig) -> Result<(Checkpoint, TrainReport)> {
    train_observed(source, target, cfg, |_| {})
}

/// [`train`], calling `observe` once per iteration before the update.
pub fn train_observed(
    source: &SourceDataset,
    target: &TargetDataset,
    cfg: &TrainConfig,
    mut observe: impl FnMut(&BatchTrace<'_>),
) -> Result<(Checkpoint, TrainReport)> {
    cfg.validate()?;
    if source.dim() != target.dim() {
        return Err(Error::Shape(format!(
            "source has {} input columns, target has {}",
            source.dim(),
            target.dim()
        )));
    }
    let mut ckpt = Checkpoint::initial(cfg.clone(), source.dim())?;
    let mut report = TrainReport::default();
    let class_count = source.class_count();

    let with_replacement_s = cfg.batch_size > source.len();
    let with_replacement_t = cfg.batch_size > target.len();
    for (flag, name, n) in [
        (with_replacement_s, "source", source.len()),
        (with_replacement_t, "target", target.len()),
    ] {
        if flag {
            report.warnings.push(format!(
                "batch size {} exceeds {name} size {n}; sampling with replacement",
                cfg.batch_size
            ));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(SAMPLING_STREAM);
    let mut losses = Vec::with_capacity(cfg.max_iters);

    for iteration in 0..cfg.max_iters {
        let s_idx = sample(&mut rng, source.len(), cfg.batch_size, with_replacement_s);
        let t_idx = sample(&mut rng, target.len(), cfg.batch_size, with_replacement_t);
        let s_points = source.points().select(Axis(0), &s_idx);
        let s_labels: Vec<usize> = s_idx.iter().map(|&i| source.labels()[i]).collect();
        let t_points = target.points().select(Axis(0), &t_idx);

        let sf = ckpt.features.forward_batch(&s_points)?;
        let tf = ckpt.features.forward_batch(&t_points)?;
        let scores = ckpt.metric.score_matrix(&sf, &tf)?;
        let tr = transduction::transduce_scored(
            scores.view(),
            &s_labels,
            class_count,
            &tf,
            cfg.knn_k,
            cfg.lambda,
            cfg.label_propagation,
        )?;
        let labels = &tr.assignment.labels;

        let mut present = vec![false; class_count];
        for &y in labels {
            present[y] = true;
        }
        let mut triplets = Vec::new();
        let mut skipped = Vec::new();
        for (i, &y) in s_labels.iter().enumerate() {
            let row = scores.row(i);
            let picked = if present[y] {
                metric::select_from_scores(i, y, row.as_slice().expect("standard layout"), labels, cfg.margin)
            } else {
                None
            };
            match picked {
                Some(t) => triplets.push(t),
                None => skipped.push(i),
            }
        }
        let active: Vec<Triplet> = triplets.iter().copied().filter(Triplet::is_active).collect();

        let loss = metric::triplet_loss(&ckpt.metric, &triplets, &sf, &tf, cfg.margin, cfg.lambda_w)?;
        if !loss.is_finite() {
            return Err(Error::NonFinite(format!("loss at iteration {iteration} is {loss}")));
        }
        let grad_w = metric::grad_w(&ckpt.metric, &active, &sf, &tf, cfg.margin, cfg.lambda_w)?;
        let mut grad_theta = vec![0.0; ckpt.features.params().len()];
        if cfg.feature_learning {
            for t in &active {
                let xs = row_slice(s_points.row(t.source));
                let xn = row_slice(t_points.row(t.negative));
                let xp = row_slice(t_points.row(t.positive));
                ckpt.features
                    .accumulate_similarity_grad(&ckpt.metric, &xs, &xn, 1.0, &mut grad_theta)?;
                ckpt.features
                    .accumulate_similarity_grad(&ckpt.metric, &xs, &xp, -1.0, &mut grad_theta)?;
            }
        }

        observe(&BatchTrace {
            iteration,
            source_labels: &s_labels,
            source_features: &sf,
            target_features: &tf,
            nn_labels: &transduction::nn_labels_from_scores(scores.view(), &s_labels),
            transduced: &tr.assignment,
            nn_energy: tr.nn_energy,
            triplets: &triplets,
            skipped: &skipped,
            grad_w: &grad_w,
            grad_theta: &grad_theta,
        });

        adagrad_step(
            ckpt.metric.entries_mut(),
            grad_w.as_slice().expect("standard layout"),
            &mut ckpt.optimizer.w,
            cfg.learning_rate,
            cfg.adagrad_epsilon,
        )?;
        if cfg.feature_learning {
            adagrad_step(
                ckpt.features.params_mut(),
                &grad_theta,
                &mut ckpt.optimizer.theta,
                cfg.learning_rate,
                cfg.adagrad_epsilon,
            )?;
        }
        if ckpt.metric.entries().iter().chain(ckpt.features.params()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("parameters after iteration {iteration}")));
        }
        ckpt.iteration += 1;

        report.records.push(IterationRecord {
            iteration,
            loss,
            energy: tr.assignment.energy,
            nn_energy: tr.nn_energy,
            active_triplets: active.len(),
            skipped_sources: skipped.len(),
        });
        losses.push(loss);
        if converged(&losses) {
            report.converged_at = Some(iteration);
            break;
        }
    }

    if target.has_ground_truth() {
        let mode = if cfg.label_propagation {
            EvalMode::Propagated
        } else {
            EvalMode::Nn
        };
        report.final_accuracy = Some(evaluate(&ckpt, source, target, mode)?);
    }
    Ok((ckpt, report))
}

fn sample(rng: &mut ChaCha8Rng, n: usize, b: usize, with_replacement: bool) -> Vec<usize> {
    if with_replacement {
        (0..b).map(|_| rng.random_range(0..n)).collect()
    } else {
        index::sample(rng, n, b).into_vec()
    }
}

fn converged(losses: &[f64]) -> bool {
    let w = CONVERGENCE_WINDOW;
    if losses.len() < 2 * w {
        return false;
    }
    let tail = &losses[losses.len() - 2 * w..];
    let prev: f64 = tail[..w].iter().sum::<f64>() / w as f64;
    let recent: f64 = tail[w..].iter().sum::<f64>() / w as f64;
    (recent - prev).abs() <= CONVERGENCE_TOLERANCE * prev.abs().max(f64::MIN_POSITIVE)
}

/// Labels `target_points` using the whole source set and the checkpoint's
/// metric, features, k and λ.
pub fn label_targets(
    ckpt: &Checkpoint,
    source: &SourceDataset,
    target_points: &Array2<f64>,
    mode: EvalMode,
) -> Result<LabelAssignment> {
    let tr = transduction::transduce_batch(
        &ckpt.metric,
        &ckpt.features,
        source.points(),
        source.labels(),
        source.class_count(),
        target_points,
        ckpt.config.knn_k,
        ckpt.config.lambda,
        mode == EvalMode::Propagated,
    )?;
    Ok(tr.assignment)
}

/// Fraction of the full target set labeled correctly.
pub fn evaluate(ckpt: &Checkpoint, source: &SourceDataset, target: &TargetDataset, mode: EvalMode) -> Result<f64> {
    let truth = target
        .evaluation_labels()
        .ok_or_else(|| Error::Precondition("target has no ground-truth labels".into()))?;
    let predicted = label_targets(ckpt, source, target.points(), mode)?;
    accuracy(&predicted.labels, truth)
}

pub fn accuracy(predicted: &[usize], truth: &[usize]) -> Result<f64> {
    if predicted.len() != truth.len() {
        return Err(Error::shape(truth.len(), predicted.len(), "predictions"));
    }
    if truth.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let correct = predicted.iter().zip(truth).filter(|(p, t)| p == t).count();
    Ok(correct as f64 / truth.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accuracy_cases() {
        assert_eq!(accuracy(&[0, 1, 2], &[0, 1, 2]).unwrap(), 1.0);
        assert_eq!(accuracy(&[3, 3], &[3, 3]).unwrap(), 1.0);
        assert_eq!(accuracy(&[0, 1, 1, 0], &[0, 1, 1, 1]).unwrap(), 0.75);
        assert!(accuracy(&[0], &[0, 1]).is_err());
    }

    #[test]
    fn convergence_window() {
        let flat = vec![1.0; 2 * CONVERGENCE_WINDOW];
        assert!(converged(&flat));
        assert!(!converged(&flat[1..]));
        let mut moving = flat.clone();
        moving[CONVERGENCE_WINDOW] = 2.0;
        assert!(!converged(&moving));
    }

    #[test]
    fn sampling_without_replacement_is_distinct() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut s = sample(&mut rng, 10, 10, false);
        s.sort_unstable();
        assert_eq!(s, (0..10).collect::<Vec<_>>());
    }
}
