//! Datasets, file formats, the synthetic benchmark, and checkpoints.

mod checkpoint;
mod csv;
mod rawmat;
mod synth;

use ndarray::Array2;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use csv::{
    load_csv, load_labels, load_source_csv, load_target_csv, parse_csv, parse_labels, write_labels,
    write_points_csv, write_source_csv, CsvTable,
};
pub use rawmat::{decode_rawmat, encode_rawmat, load_rawmat, save_rawmat, RAWMAT_MAGIC};
pub use synth::{synth_blobs, SynthConfig, SYNTH_RADIUS};

use crate::error::{Error, Result};

fn check_finite(points: &Array2<f64>) -> Result<()> {
    for ((r, c), v) in points.indexed_iter() {
        if !v.is_finite() {
            return Err(Error::NonFinite(format!("point ({r}, {c}) is {v}")));
        }
    }
    Ok(())
}

/// Labeled source points. Labels lie in `0..class_count`.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceDataset {
    points: Array2<f64>,
    labels: Vec<usize>,
    class_count: usize,
}

impl SourceDataset {
    pub fn new(points: Array2<f64>, labels: Vec<usize>, class_count: usize) -> Result<Self> {
        if points.nrows() == 0 {
            return Err(Error::EmptyDataset);
        }
        if labels.len() != points.nrows() {
            return Err(Error::shape(points.nrows(), labels.len(), "source labels"));
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= class_count) {
            return Err(Error::Domain(format!("label {bad} >= class count {class_count}")));
        }
        check_finite(&points)?;
        Ok(Self {
            points,
            labels,
            class_count,
        })
    }

    pub fn points(&self) -> &Array2<f64> {
        &self.points
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn len(&self) -> usize {
        self.points.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.points.ncols()
    }
}

/// Unlabeled target points, optionally carrying ground truth that only the
/// evaluation path reads.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetDataset {
    points: Array2<f64>,
    ground_truth: Option<Vec<usize>>,
}

impl TargetDataset {
    pub fn new(points: Array2<f64>) -> Result<Self> {
        if points.nrows() == 0 {
            return Err(Error::EmptyDataset);
        }
        check_finite(&points)?;
        Ok(Self {
            points,
            ground_truth: None,
        })
    }

    pub fn with_ground_truth(points: Array2<f64>, labels: Vec<usize>, class_count: usize) -> Result<Self> {
        let mut t = Self::new(points)?;
        if labels.len() != t.len() {
            return Err(Error::shape(t.len(), labels.len(), "ground-truth labels"));
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= class_count) {
            return Err(Error::Domain(format!("ground-truth label {bad} >= class count {class_count}")));
        }
        t.ground_truth = Some(labels);
        Ok(t)
    }

    pub fn points(&self) -> &Array2<f64> {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.points.ncols()
    }

    pub fn has_ground_truth(&self) -> bool {
        self.ground_truth.is_some()
    }

    /// Ground-truth labels. Reserved for scoring; training never calls this.
    pub fn evaluation_labels(&self) -> Option<&[usize]> {
        self.ground_truth.as_deref()
    }

    /// Copy without ground truth.
    pub fn unlabeled(&self) -> Self {
        Self {
            points: self.points.clone(),
            ground_truth: None,
        }
    }
}
