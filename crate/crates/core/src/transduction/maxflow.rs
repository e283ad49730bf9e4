//! Shortest-augmenting-path (Edmonds–Karp) max-flow on real capacities.

use std::collections::VecDeque;

#[derive(Debug, Clone)]
struct Arc {
    to: usize,
    residual: f64,
}

/// Two-terminal flow network. Arcs are stored in pairs: arc `e` and its
/// reverse `e ^ 1`.
#[derive(Debug, Clone)]
pub struct FlowNetwork {
    arcs: Vec<Arc>,
    adjacency: Vec<Vec<usize>>,
    max_capacity: f64,
}

impl FlowNetwork {
    pub fn new(nodes: usize) -> Self {
        Self {
            arcs: Vec::new(),
            adjacency: vec![Vec::new(); nodes],
            max_capacity: 0.0,
        }
    }

    pub fn node_count(&self) -> usize {
        self.adjacency.len()
    }

    /// Adds `u → v` with capacity `cap` and `v → u` with capacity `rev_cap`.
    pub fn add_edge(&mut self, u: usize, v: usize, cap: f64, rev_cap: f64) {
        debug_assert!(cap >= 0.0 && rev_cap >= 0.0);
        let e = self.arcs.len();
        self.arcs.push(Arc { to: v, residual: cap });
        self.arcs.push(Arc { to: u, residual: rev_cap });
        self.adjacency[u].push(e);
        self.adjacency[v].push(e + 1);
        self.max_capacity = self.max_capacity.max(cap).max(rev_cap);
    }

    /// Residual capacities at or below this are treated as saturated.
    fn eps(&self) -> f64 {
        1e-12 * self.max_capacity.max(1.0)
    }

    /// Pushes the maximum flow from `source` to `sink` and returns its value.
    pub fn max_flow(&mut self, source: usize, sink: usize) -> f64 {
        assert_ne!(source, sink);
        let eps = self.eps();
        let n = self.node_count();
        let mut total = 0.0;
        let mut parent = vec![usize::MAX; n];
        loop {
            parent.fill(usize::MAX);
            let mut queue = VecDeque::from([source]);
            let mut reached = false;
            'bfs: while let Some(u) = queue.pop_front() {
                for &e in &self.adjacency[u] {
                    let v = self.arcs[e].to;
                    if v != source && parent[v] == usize::MAX && self.arcs[e].residual > eps {
                        parent[v] = e;
                        if v == sink {
                            reached = true;
                            break 'bfs;
                        }
                        queue.push_back(v);
                    }
                }
            }
            if !reached {
                return total;
            }

            let mut delta = f64::INFINITY;
            let mut v = sink;
            while v != source {
                let e = parent[v];
                delta = delta.min(self.arcs[e].residual);
                v = self.arcs[e ^ 1].to;
            }
            let mut v = sink;
            while v != source {
                let e = parent[v];
                self.arcs[e].residual -= delta;
                self.arcs[e ^ 1].residual += delta;
                v = self.arcs[e ^ 1].to;
            }
            total += delta;
        }
    }

    /// After [`max_flow`](Self::max_flow): nodes that can still reach
    /// `sink` in the residual graph. Every other node is on the source side
    /// of a minimum cut, so this picks the cut with the largest source set.
    pub fn reaches_sink(&self, sink: usize) -> Vec<bool> {
        let eps = self.eps();
        let mut seen = vec![false; self.node_count()];
        seen[sink] = true;
        let mut queue = VecDeque::from([sink]);
        while let Some(v) = queue.pop_front() {
            for &e in &self.adjacency[v] {
                // arc e is v → u; its reverse u → v has residual arcs[e ^ 1]
                let u = self.arcs[e].to;
                if !seen[u] && self.arcs[e ^ 1].residual > eps {
                    seen[u] = true;
                    queue.push_back(u);
                }
            }
        }
        seen
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classic_network() {
        // CLRS figure 26.1: max flow 23
        let mut g = FlowNetwork::new(6);
        for (u, v, c) in [
            (0, 1, 16.0),
            (0, 2, 13.0),
            (2, 1, 4.0),
            (1, 3, 12.0),
            (3, 2, 9.0),
            (2, 4, 14.0),
            (4, 3, 7.0),
            (3, 5, 20.0),
            (4, 5, 4.0),
        ] {
            g.add_edge(u, v, c, 0.0);
        }
        assert!((g.max_flow(0, 5) - 23.0).abs() < 1e-12);
        let side = g.reaches_sink(5);
        assert!(!side[0]);
        assert!(side[5]);
    }

    #[test]
    fn disconnected_has_zero_flow() {
        let mut g = FlowNetwork::new(3);
        g.add_edge(0, 1, 5.0, 0.0);
        assert_eq!(g.max_flow(0, 2), 0.0);
        assert_eq!(g.reaches_sink(2), vec![false, false, true]);
    }

    #[test]
    fn tie_cut_prefers_source_side() {
        // s → a (1), a → t (1): both cuts cost 1; `a` stays on the source side
        let mut g = FlowNetwork::new(3);
        g.add_edge(0, 1, 1.0, 0.0);
        g.add_edge(1, 2, 1.0, 0.0);
        assert_eq!(g.max_flow(0, 2), 1.0);
        assert!(!g.reaches_sink(2)[1]);
    }
}
