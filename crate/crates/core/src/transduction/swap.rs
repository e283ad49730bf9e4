//! Alpha-beta swap moves for Potts energies.
//!
//! A move over the class pair `(α, β)` lets every node currently labeled
//! `α` or `β` switch to either of the two, with all other nodes fixed. The
//! best such move is a minimum s-t cut:
//!
//! - `s → p` carries the cost of giving `p` label `β`, `p → t` the cost of
//!   `α` (unary plus Potts terms to fixed neighbors);
//! - each edge between two movable nodes becomes a pair of arcs with its
//!   Potts coefficient.
//!
//! Nodes left on the source side take `α`. Among minimum cuts we keep the
//! one with the largest source side, so ties resolve to the lower class.

use super::maxflow::FlowNetwork;
use super::{EnergyModel, LabelAssignment};
use crate::error::{Error, Result};

/// Optimal swap move for one class pair.
#[derive(Debug, Clone, PartialEq)]
pub struct SwapSolution {
    pub labels: Vec<usize>,
    /// Minimum over all moves of the energy restricted to the movable
    /// nodes: their unaries plus every pairwise term touching them.
    pub restricted_energy: f64,
}

/// Solves the swap move over `(alpha, beta)` starting from `labels`.
pub fn solve_swap(model: &EnergyModel, labels: &[usize], alpha: usize, beta: usize) -> Result<SwapSolution> {
    model.check_labels(labels)?;
    if alpha == beta || !model.is_admissible(alpha) || !model.is_admissible(beta) {
        return Err(Error::Domain(format!("invalid swap pair ({alpha}, {beta})")));
    }
    check_submodular(model)?;

    let movable: Vec<usize> = (0..labels.len())
        .filter(|&i| labels[i] == alpha || labels[i] == beta)
        .collect();
    let mut out = labels.to_vec();
    if movable.is_empty() {
        return Ok(SwapSolution {
            labels: out,
            restricted_energy: 0.0,
        });
    }

    let mut slot = vec![usize::MAX; labels.len()];
    for (k, &i) in movable.iter().enumerate() {
        slot[i] = k;
    }
    let source = movable.len();
    let sink = source + 1;
    let mut net = FlowNetwork::new(movable.len() + 2);
    let mut constant = 0.0;
    for (k, &p) in movable.iter().enumerate() {
        let mut cost_alpha = model.unary(p, alpha);
        let mut cost_beta = model.unary(p, beta);
        for term in model.incident(p) {
            let q = if term.a == p { term.b } else { term.a };
            if slot[q] != usize::MAX {
                // movable pair; added once below from the lower endpoint
                if p < q {
                    net.add_edge(k, slot[q], term.coefficient, term.coefficient);
                }
                continue;
            }
            if labels[q] != alpha {
                cost_alpha += term.coefficient;
            }
            if labels[q] != beta {
                cost_beta += term.coefficient;
            }
        }
        let base = cost_alpha.min(cost_beta);
        constant += base;
        net.add_edge(source, k, cost_beta - base, 0.0);
        net.add_edge(k, sink, cost_alpha - base, 0.0);
    }

    let flow = net.max_flow(source, sink);
    let sink_side = net.reaches_sink(sink);
    for (k, &p) in movable.iter().enumerate() {
        out[p] = if sink_side[k] { beta } else { alpha };
    }
    Ok(SwapSolution {
        labels: out,
        restricted_energy: flow + constant,
    })
}

fn check_submodular(model: &EnergyModel) -> Result<()> {
    match model.pairwise().iter().find(|p| p.coefficient < 0.0) {
        Some(p) => Err(Error::Precondition(format!(
            "negative pairwise coefficient {} on ({}, {})",
            p.coefficient, p.a, p.b
        ))),
        None => Ok(()),
    }
}

/// Runs full sweeps of swap moves over all admissible class pairs, in
/// ascending order, until a sweep accepts no move. A move is accepted only
/// if it strictly lowers the energy.
pub fn alpha_beta_swap(model: &EnergyModel, init: &LabelAssignment) -> Result<LabelAssignment> {
    check_submodular(model)?;
    let mut current = model.assign(init.labels.clone())?;
    let classes: Vec<usize> = model.admissible_classes().collect();
    loop {
        let mut improved = false;
        for (x, &alpha) in classes.iter().enumerate() {
            for &beta in &classes[x + 1..] {
                let candidate = solve_swap(model, &current.labels, alpha, beta)?;
                let energy = model.energy(&candidate.labels)?;
                let tol = 1e-12 * current.energy.abs().max(1.0);
                if energy < current.energy - tol {
                    current = LabelAssignment {
                        labels: candidate.labels,
                        energy,
                    };
                    improved = true;
                }
            }
        }
        if !improved {
            return Ok(current);
        }
    }
}
