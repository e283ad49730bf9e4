//! Cosine k-nearest-neighbor graph over a target batch.

use std::collections::BTreeSet;
use std::io::{self, Write};

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::metric::cosine;

/// Default neighborhood size.
pub const DEFAULT_K: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub index: usize,
    pub weight: f64,
}

/// Undirected edge with `a < b` and weight in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub a: usize,
    pub b: usize,
    pub weight: f64,
}

/// Directed top-k lists plus their symmetric closure. Edge weights are
/// cosine similarities clamped at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct KnnGraph {
    neighbors: Vec<Vec<Neighbor>>,
    edges: Vec<Edge>,
    incident: Vec<Vec<usize>>,
}

impl KnnGraph {
    /// Brute-force construction. `k` is truncated to `n − 1`; fewer than two
    /// points yield a graph without edges.
    pub fn build(features: &Array2<f64>, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::Config("k must be at least 1".into()));
        }
        let n = features.nrows();
        let rows: Vec<Vec<f64>> = features.rows().into_iter().map(|r| r.to_vec()).collect();
        let k = k.min(n.saturating_sub(1));

        let mut neighbors = Vec::with_capacity(n);
        let mut undirected = BTreeSet::new();
        for i in 0..n {
            let mut cands: Vec<(usize, f64)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| (j, cosine(&rows[i], &rows[j])))
                .collect();
            // descending cosine, ascending index on ties
            cands.sort_by(|x, y| y.1.total_cmp(&x.1).then(x.0.cmp(&y.0)));
            cands.truncate(k);
            for &(j, _) in &cands {
                undirected.insert((i.min(j), i.max(j)));
            }
            neighbors.push(
                cands
                    .into_iter()
                    .map(|(index, c)| Neighbor {
                        index,
                        weight: c.max(0.0),
                    })
                    .collect(),
            );
        }

        let mut incident = vec![Vec::new(); n];
        let edges: Vec<Edge> = undirected
            .into_iter()
            .enumerate()
            .map(|(e, (a, b))| {
                incident[a].push(e);
                incident[b].push(e);
                Edge {
                    a,
                    b,
                    weight: cosine(&rows[a], &rows[b]).max(0.0),
                }
            })
            .collect();
        Ok(Self {
            neighbors,
            edges,
            incident,
        })
    }

    pub fn node_count(&self) -> usize {
        self.neighbors.len()
    }

    /// Directed k-NN list of node `i`, sorted by descending weight.
    pub fn neighbors(&self, i: usize) -> &[Neighbor] {
        &self.neighbors[i]
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Undirected edges touching node `i`.
    pub fn incident_edges(&self, i: usize) -> impl Iterator<Item = &Edge> {
        self.incident[i].iter().map(|&e| &self.edges[e])
    }

    /// One `a,b,weight` line per undirected edge.
    pub fn write_edge_list(&self, mut out: impl Write) -> io::Result<()> {
        for e in &self.edges {
            writeln!(out, "{},{},{}", e.a, e.b, e.weight)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn identical_points_tie_to_lowest_index() {
        let f = array![[1.0, 1.0], [1.0, 1.0], [1.0, 1.0]];
        let g = KnnGraph::build(&f, 1).unwrap();
        let firsts: Vec<usize> = (0..3).map(|i| g.neighbors(i)[0].index).collect();
        assert_eq!(firsts, vec![1, 0, 0]);
        assert!(g.edges().iter().all(|e| (e.weight - 1.0).abs() < 1e-15));
        assert_eq!(g.edges().len(), 2);
    }

    #[test]
    fn axes_example() {
        let f = array![[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]];
        let g = KnnGraph::build(&f, 1).unwrap();
        // node 2 is equally close to both axes; the lower index wins
        assert_eq!(g.neighbors(2)[0].index, 0);
        assert!((g.neighbors(2)[0].weight - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        assert_eq!(g.neighbors(0)[0].index, 2);
        assert_eq!(g.neighbors(1)[0].index, 2);
    }

    #[test]
    fn k_is_truncated() {
        let f = array![[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]];
        assert_eq!(KnnGraph::build(&f, 5).unwrap(), KnnGraph::build(&f, 2).unwrap());
    }

    #[test]
    fn degenerate_inputs() {
        let g = KnnGraph::build(&array![[1.0, 2.0]], 4).unwrap();
        assert_eq!(g.node_count(), 1);
        assert!(g.edges().is_empty());
        assert!(KnnGraph::build(&array![[1.0], [2.0]], 0).is_err());
    }

    #[test]
    fn negative_cosine_is_clamped() {
        let f = array![[1.0, 0.0], [-1.0, 0.0]];
        let g = KnnGraph::build(&f, 1).unwrap();
        assert_eq!(g.edges(), &[Edge { a: 0, b: 1, weight: 0.0 }]);
    }

    #[test]
    fn edge_list_dump() {
        let f = array![[1.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        let g = KnnGraph::build(&f, 1).unwrap();
        let mut buf = Vec::new();
        g.write_edge_list(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "0,1,1\n0,2,0\n");
        assert_eq!(g.incident_edges(0).count(), 2);
    }
}
