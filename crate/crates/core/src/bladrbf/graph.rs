//! Directed communication graphs and their edge-list text form:
//!
//! ```text
//! 3
//! 0 1
//! 1 2
//! 2 0
//! ```
//!
//! The first line is the node count, every further line an edge `u v`
//! (0-based). Blank lines and `#` comments are ignored.

use std::collections::VecDeque;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Largest node count accepted from text.
const MAX_NODES: usize = 1 << 16;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommGraph {
    nodes: usize,
    edges: Vec<(usize, usize)>,
    out_n: Vec<Vec<usize>>,
    in_n: Vec<Vec<usize>>,
}

impl CommGraph {
    /// Builds a graph; duplicate edges collapse, self-loops are rejected.
    pub fn new(nodes: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        if nodes == 0 {
            return Err(Error::Domain("communication graph needs at least one node".into()));
        }
        let mut list: Vec<(usize, usize)> = Vec::new();
        for (u, v) in edges {
            if u >= nodes || v >= nodes {
                return Err(Error::Domain(format!("edge ({u}, {v}) out of range for {nodes} nodes")));
            }
            if u == v {
                return Err(Error::Domain(format!("self-loop at node {u}")));
            }
            list.push((u, v));
        }
        list.sort_unstable();
        list.dedup();
        let mut out_n = vec![Vec::new(); nodes];
        let mut in_n = vec![Vec::new(); nodes];
        for &(u, v) in &list {
            out_n[u].push(v);
            in_n[v].push(u);
        }
        Ok(CommGraph {
            nodes,
            edges: list,
            out_n,
            in_n,
        })
    }

    /// Directed ring `0 -> 1 -> ... -> n-1 -> 0`.
    pub fn ring(nodes: usize) -> Result<Self> {
        let edges = if nodes > 1 {
            (0..nodes).map(|i| (i, (i + 1) % nodes)).collect()
        } else {
            Vec::new()
        };
        CommGraph::new(nodes, edges)
    }

    pub fn complete(nodes: usize) -> Result<Self> {
        let edges: Vec<_> = (0..nodes)
            .flat_map(|u| (0..nodes).filter(move |v| *v != u).map(move |v| (u, v)))
            .collect();
        CommGraph::new(nodes, edges)
    }

    /// A ring over a seeded permutation plus each remaining edge with
    /// probability `extra`; strongly connected by construction.
    pub fn random_strongly_connected(nodes: usize, extra: f64, seed: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&extra) {
            return Err(Error::Domain(format!("edge probability {extra} outside [0, 1]")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut perm: Vec<usize> = (0..nodes).collect();
        perm.shuffle(&mut rng);
        let mut edges = Vec::new();
        if nodes > 1 {
            for i in 0..nodes {
                edges.push((perm[i], perm[(i + 1) % nodes]));
            }
        }
        for u in 0..nodes {
            for v in 0..nodes {
                if u != v && rng.random_bool(extra) {
                    edges.push((u, v));
                }
            }
        }
        CommGraph::new(nodes, edges)
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn out_neighbors(&self, i: usize) -> &[usize] {
        &self.out_n[i]
    }

    pub fn in_neighbors(&self, i: usize) -> &[usize] {
        &self.in_n[i]
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
            .filter(|(_, l)| !l.is_empty());
        let (ln, head) = lines.next().ok_or_else(|| Error::parse(0, "empty graph file"))?;
        let nodes: usize = head
            .parse()
            .map_err(|_| Error::parse(ln, format!("invalid node count '{head}'")))?;
        if nodes == 0 || nodes > MAX_NODES {
            return Err(Error::parse(ln, format!("node count {nodes} outside 1..={MAX_NODES}")));
        }
        let mut edges = Vec::new();
        for (ln, l) in lines {
            let toks: Vec<&str> = l.split_whitespace().collect();
            if toks.len() != 2 {
                return Err(Error::parse(ln, "edge line must be 'u v'"));
            }
            let u: usize = toks[0]
                .parse()
                .map_err(|_| Error::parse(ln, format!("invalid node '{}'", toks[0])))?;
            let v: usize = toks[1]
                .parse()
                .map_err(|_| Error::parse(ln, format!("invalid node '{}'", toks[1])))?;
            if u >= nodes || v >= nodes || u == v {
                return Err(Error::parse(ln, format!("invalid edge ({u}, {v})")));
            }
            edges.push((u, v));
        }
        CommGraph::new(nodes, edges)
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("{}\n", self.nodes);
        for (u, v) in &self.edges {
            let _ = writeln!(s, "{u} {v}");
        }
        s
    }

    fn reachable_from(&self, src: usize) -> Vec<bool> {
        let mut seen = vec![false; self.nodes];
        let mut q = VecDeque::from([src]);
        seen[src] = true;
        while let Some(u) = q.pop_front() {
            for &v in &self.out_n[u] {
                if !seen[v] {
                    seen[v] = true;
                    q.push_back(v);
                }
            }
        }
        seen
    }
}

/// Outcome of [`validate_graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GraphCheck {
    pub strongly_connected: bool,
    /// First ordered pair `(i, j)` with no directed path from `i` to `j`.
    pub unreachable: Option<(usize, usize)>,
}

/// Strong connectivity test with a counterexample on failure.
pub fn validate_graph(graph: &CommGraph) -> GraphCheck {
    for i in 0..graph.nodes() {
        if let Some(j) = graph.reachable_from(i).iter().position(|r| !r) {
            return GraphCheck {
                strongly_connected: false,
                unreachable: Some((i, j)),
            };
        }
    }
    GraphCheck {
        strongly_connected: true,
        unreachable: None,
    }
}
