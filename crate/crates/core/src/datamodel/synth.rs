//! Rotated Gaussian blobs: a desk-scale domain-shift benchmark.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{SourceDataset, TargetDataset};
use crate::error::{Error, Result};

/// Class centers sit evenly on a circle of this radius.
pub const SYNTH_RADIUS: f64 = 5.0;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub class_count: usize,
    pub per_class: usize,
    /// Counter-clockwise rotation applied to the target domain.
    pub rotation_deg: f64,
    /// Translation applied to the target domain after rotation.
    pub shift: [f64; 2],
    pub noise_sd: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            class_count: 3,
            per_class: 200,
            rotation_deg: 30.0,
            shift: [0.0, 0.0],
            noise_sd: 1.0,
            seed: 7,
        }
    }
}

fn draw(cfg: &SynthConfig, rng: &mut ChaCha8Rng) -> (Array2<f64>, Vec<usize>) {
    let k = cfg.class_count;
    let n = k * cfg.per_class;
    let mut points = Array2::zeros((n, 2));
    let mut labels = Vec::with_capacity(n);
    for c in 0..k {
        let angle = std::f64::consts::TAU * c as f64 / k as f64;
        let center = [SYNTH_RADIUS * angle.cos(), SYNTH_RADIUS * angle.sin()];
        for _ in 0..cfg.per_class {
            let row = labels.len();
            for (d, &m) in center.iter().enumerate() {
                let z: f64 = rng.sample(StandardNormal);
                points[(row, d)] = m + cfg.noise_sd * z;
            }
            labels.push(c);
        }
    }
    (points, labels)
}

/// Source: `per_class` points around each center, class-major order.
/// Target: an independent draw from the same blobs, rotated about the
/// origin and then shifted, carrying hidden ground truth.
pub fn synth_blobs(cfg: &SynthConfig) -> Result<(SourceDataset, TargetDataset)> {
    if cfg.class_count < 2 {
        return Err(Error::Config(format!("need at least 2 classes, got {}", cfg.class_count)));
    }
    if cfg.per_class == 0 {
        return Err(Error::Config("per-class count must be >= 1".into()));
    }
    if !(cfg.noise_sd >= 0.0 && cfg.noise_sd.is_finite()) {
        return Err(Error::Config(format!("noise sd must be >= 0, got {}", cfg.noise_sd)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (src_points, src_labels) = draw(cfg, &mut rng);
    rng.set_stream(1);
    rng.set_word_pos(0);
    let (mut tgt_points, tgt_labels) = draw(cfg, &mut rng);

    let (sin, cos) = cfg.rotation_deg.to_radians().sin_cos();
    for mut row in tgt_points.rows_mut() {
        let (x, y) = (row[0], row[1]);
        row[0] = cos * x - sin * y + cfg.shift[0];
        row[1] = sin * x + cos * y + cfg.shift[1];
    }
    let source = SourceDataset::new(src_points, src_labels, cfg.class_count)?;
    let target = TargetDataset::with_ground_truth(tgt_points, tgt_labels, cfg.class_count)?;
    Ok((source, target))
}
