use std::io::{self, Write};

use crate::cli::fmt_g6;

/// Bookkeeping for one training iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Hinge sum plus regularizer, evaluated before the update.
    pub loss: f64,
    /// Energy of the labeling used for triplet selection.
    pub energy: f64,
    /// Energy of the nearest-neighbor labeling of the same batch.
    pub nn_energy: f64,
    pub active_triplets: usize,
    /// Source points that formed no triplet: their label is absent from
    /// the transduced batch labels, or every target shares it.
    pub skipped_sources: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainReport {
    pub records: Vec<IterationRecord>,
    pub warnings: Vec<String>,
    /// Iteration at which the convergence test stopped training.
    pub converged_at: Option<usize>,
    /// Accuracy on the full target set, when ground truth was available.
    pub final_accuracy: Option<f64>,
}

impl TrainReport {
    pub const TRACE_HEADER: &'static str = "iteration,loss,energy,active_triplets,skipped_sources";

    pub fn write_trace_csv(&self, mut out: impl Write) -> io::Result<()> {
        writeln!(out, "{}", Self::TRACE_HEADER)?;
        for r in &self.records {
            writeln!(
                out,
                "{},{},{},{},{}",
                r.iteration,
                fmt_g6(r.loss),
                fmt_g6(r.energy),
                r.active_triplets,
                r.skipped_sources
            )?;
        }
        Ok(())
    }
}
