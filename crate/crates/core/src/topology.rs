//! Network graphs over `n` devices and the role each device plays.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TopologyKind {
    Linear,
    Ring,
    Star,
    Mesh,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Continuous,
    Aggregate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeRole {
    Trainer,
    TrainerAggregator,
    /// Never assigned.
    Proxy,
    /// Never assigned.
    Idle,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopologyGraph {
    pub kind: TopologyKind,
    pub n: usize,
    /// Undirected edges as `(a, b)` with `a < b`.
    pub edges: BTreeSet<(usize, usize)>,
    pub center: Option<usize>,
    pub roles: Vec<NodeRole>,
}

fn edge(a: usize, b: usize) -> (usize, usize) {
    (a.min(b), a.max(b))
}

/// Builds the graph for `kind` on nodes `0..n`.
///
/// Linear and ring graphs get continuous-strategy roles; use
/// [`TopologyGraph::with_strategy`] for the aggregate variants.
pub fn build_topology(kind: TopologyKind, n: usize, center: Option<usize>) -> Result<TopologyGraph> {
    if n == 0 {
        return Err(Error::InvalidTopology("a topology needs at least one node".into()));
    }
    if center.is_some() && kind != TopologyKind::Star {
        return Err(Error::InvalidTopology(format!("{kind:?} has no center")));
    }
    let edges: BTreeSet<(usize, usize)> = match kind {
        TopologyKind::Linear => (1..n).map(|i| edge(i - 1, i)).collect(),
        TopologyKind::Ring => {
            if n < 3 {
                return Err(Error::InvalidTopology(format!(
                    "a ring needs at least 3 nodes, got {n}"
                )));
            }
            (0..n).map(|i| edge(i, (i + 1) % n)).collect()
        }
        TopologyKind::Star => {
            let c = center.unwrap_or(0);
            if c >= n {
                return Err(Error::InvalidTopology(format!("center {c} out of range for {n} nodes")));
            }
            (0..n).filter(|&i| i != c).map(|i| edge(c, i)).collect()
        }
        TopologyKind::Mesh => (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).collect(),
    };
    let center = (kind == TopologyKind::Star).then(|| center.unwrap_or(0));
    let strategy = match kind {
        TopologyKind::Linear | TopologyKind::Ring => Strategy::Continuous,
        TopologyKind::Star | TopologyKind::Mesh => Strategy::Aggregate,
    };
    let graph = TopologyGraph {
        kind,
        n,
        edges,
        center,
        roles: Vec::new(),
    };
    graph.with_strategy(strategy)
}

impl TopologyGraph {
    /// Reassigns roles for `strategy`. Continuous star and mesh are rejected.
    pub fn with_strategy(mut self, strategy: Strategy) -> Result<Self> {
        self.roles = match (self.kind, strategy) {
            (TopologyKind::Linear | TopologyKind::Ring, Strategy::Continuous) => vec![NodeRole::Trainer; self.n],
            (TopologyKind::Linear | TopologyKind::Ring | TopologyKind::Mesh, Strategy::Aggregate) => {
                vec![NodeRole::TrainerAggregator; self.n]
            }
            (TopologyKind::Star, Strategy::Aggregate) => (0..self.n)
                .map(|i| {
                    if Some(i) == self.center {
                        NodeRole::TrainerAggregator
                    } else {
                        NodeRole::Trainer
                    }
                })
                .collect(),
            (kind, Strategy::Continuous) => {
                return Err(Error::InvalidTopology(format!(
                    "continuous training is undefined on {kind:?}"
                )))
            }
        };
        Ok(self)
    }

    pub fn neighbors(&self, node: usize) -> Vec<usize> {
        self.edges
            .iter()
            .filter_map(|&(a, b)| {
                if a == node {
                    Some(b)
                } else if b == node {
                    Some(a)
                } else {
                    None
                }
            })
            .collect()
    }

    pub fn is_connected(&self) -> bool {
        let mut seen = vec![false; self.n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(v) = stack.pop() {
            for u in self.neighbors(v) {
                if !seen[u] {
                    seen[u] = true;
                    stack.push(u);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    /// `{"kind", "n", "center", "roles", "adjacency"}` with sorted neighbor lists.
    pub fn to_adjacency_json(&self) -> serde_json::Value {
        let adjacency: Vec<Vec<usize>> = (0..self.n).map(|i| self.neighbors(i)).collect();
        serde_json::json!({
            "kind": self.kind,
            "n": self.n,
            "center": self.center,
            "roles": self.roles,
            "adjacency": adjacency,
        })
    }
}
