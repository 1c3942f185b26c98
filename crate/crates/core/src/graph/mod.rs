//! Undirected simple graphs on dense node indices `0..n`.

mod generate;
mod io;

pub use generate::{generate, GraphKind, MAX_ATTEMPTS};
pub use io::{load, parse_edge_list, save, to_edge_list, to_json, FileFormat};

use crate::{Error, Matrix, Result};
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;

/// An ordered pair of nodes `(v, u)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodePair {
    pub v: usize,
    pub u: usize,
}

impl NodePair {
    pub fn new(v: usize, u: usize) -> Self {
        NodePair { v, u }
    }

    pub fn swapped(self) -> Self {
        NodePair {
            v: self.u,
            u: self.v,
        }
    }

    /// Checks both indices against `n`, and `v != u` unless `allow_equal`.
    pub fn check(self, n: usize, allow_equal: bool) -> Result<()> {
        for index in [self.v, self.u] {
            if index >= n {
                return Err(Error::NodeOutOfRange { index, n });
            }
        }
        if !allow_equal && self.v == self.u {
            return Err(Error::InvalidParameter(format!(
                "pair ({}, {}) must have distinct nodes",
                self.v, self.u
            )));
        }
        Ok(())
    }
}

/// Undirected simple graph.
///
/// Connectivity and bipartiteness are computed at construction time. A graph is
/// *validated* when it is connected and contains an odd cycle.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    /// Sorted list of edges `(a, b)` with `a < b`.
    edges: Vec<(usize, usize)>,
    neighbors: Vec<Vec<usize>>,
    components: Vec<Vec<usize>>,
    bipartite: bool,
}

impl Graph {
    /// Builds a graph, rejecting self-loops, duplicates and out-of-range nodes.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter(
                "graph needs at least one node".into(),
            ));
        }
        let mut normalized = Vec::with_capacity(edges.len());
        for &(a, b) in edges {
            for index in [a, b] {
                if index >= n {
                    return Err(Error::NodeOutOfRange { index, n });
                }
            }
            if a == b {
                return Err(Error::SelfLoop {
                    node: a,
                    line: None,
                });
            }
            normalized.push((a.min(b), a.max(b)));
        }
        normalized.sort_unstable();
        if let Some(w) = normalized.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::DuplicateEdge {
                u: w[0].0,
                v: w[0].1,
                line: None,
            });
        }
        let mut neighbors = vec![Vec::new(); n];
        for &(a, b) in &normalized {
            neighbors[a].push(b);
            neighbors[b].push(a);
        }
        for list in &mut neighbors {
            list.sort_unstable();
        }
        let (components, bipartite) = components_and_coloring(&neighbors);
        Ok(Graph {
            n,
            edges: normalized,
            neighbors,
            components,
            bipartite,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.neighbors[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.neighbors[v].len()
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.neighbors.iter().map(Vec::len).collect()
    }

    pub fn min_degree(&self) -> usize {
        self.neighbors.iter().map(Vec::len).min().unwrap_or(0)
    }

    pub fn max_degree(&self) -> usize {
        self.neighbors.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        a < self.n && self.neighbors[a].binary_search(&b).is_ok()
    }

    pub fn is_connected(&self) -> bool {
        self.components.len() == 1
    }

    /// True when the graph has no odd cycle (a 2-coloring exists).
    pub fn is_bipartite(&self) -> bool {
        self.bipartite
    }

    /// Connected and non-bipartite.
    pub fn is_validated(&self) -> bool {
        self.is_connected() && !self.bipartite
    }

    /// Connected components, each sorted, ordered by smallest member.
    pub fn components(&self) -> &[Vec<usize>] {
        &self.components
    }

    pub fn require_connected(&self) -> Result<()> {
        if self.is_connected() {
            Ok(())
        } else {
            Err(Error::Disconnected {
                components: self.components.clone(),
            })
        }
    }

    /// Connected and non-bipartite, or the corresponding error.
    pub fn require_validated(&self) -> Result<()> {
        self.require_connected()?;
        if self.bipartite {
            return Err(Error::Bipartite);
        }
        Ok(())
    }

    pub fn adjacency_matrix(&self) -> Matrix {
        let mut a = Matrix::zeros(self.n, self.n);
        for &(x, y) in &self.edges {
            a[(x, y)] = 1.0;
            a[(y, x)] = 1.0;
        }
        a
    }

    /// BFS distances from `source`; `None` for unreachable nodes.
    pub fn bfs(&self, source: usize) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.n];
        let mut queue = VecDeque::new();
        dist[source] = Some(0);
        queue.push_back(source);
        while let Some(x) = queue.pop_front() {
            let dx = dist[x].expect("queued nodes are labelled");
            for &y in &self.neighbors[x] {
                if dist[y].is_none() {
                    dist[y] = Some(dx + 1);
                    queue.push_back(y);
                }
            }
        }
        dist
    }

    /// All-pairs BFS distances; requires a connected graph.
    pub fn distance_matrix(&self) -> Result<Vec<Vec<usize>>> {
        self.require_connected()?;
        Ok((0..self.n)
            .map(|s| {
                self.bfs(s)
                    .into_iter()
                    .map(|d| d.expect("connected"))
                    .collect()
            })
            .collect())
    }

    pub fn diameter(&self) -> Result<usize> {
        Ok(self
            .distance_matrix()?
            .iter()
            .flat_map(|row| row.iter().copied())
            .max()
            .unwrap_or(0))
    }

    /// Length of a shortest path between `v` and `u`.
    pub fn shortest_distance(&self, pair: NodePair) -> Result<usize> {
        self.require_connected()?;
        pair.check(self.n, true)?;
        Ok(self.bfs(pair.v)[pair.u].expect("connected"))
    }

    /// Number of walks of length `r` from `u` to `v`, by `r` integer mat-vec products.
    /// Saturates at `u128::MAX`.
    pub fn walk_count(&self, pair: NodePair, r: usize) -> u128 {
        let mut x = vec![0u128; self.n];
        x[pair.u] = 1;
        for _ in 0..r {
            let next: Vec<u128> = (0..self.n)
                .map(|a| {
                    self.neighbors[a]
                        .iter()
                        .fold(0u128, |acc, &b| acc.saturating_add(x[b]))
                })
                .collect();
            x = next;
        }
        x[pair.v]
    }

    /// Number of shortest paths between `v` and `u`, computed as `(A^r)_vu` with `r = d(v,u)`.
    ///
    /// Walks of length `d(v,u)` between nodes at distance `d(v,u)` are shortest paths.
    pub fn count_shortest_paths(&self, pair: NodePair) -> Result<u128> {
        pair.check(self.n, false)?;
        let r = self.shortest_distance(pair)?;
        Ok(self.walk_count(pair, r))
    }

    /// Graph with node `i` renamed to `perm[i]`.
    pub fn relabel(&self, perm: &[usize]) -> Result<Graph> {
        if perm.len() != self.n {
            return Err(Error::DimensionMismatch("permutation length".into()));
        }
        let edges: Vec<_> = self
            .edges
            .iter()
            .map(|&(a, b)| (perm[a], perm[b]))
            .collect();
        Graph::from_edges(self.n, &edges)
    }

    /// Copy with the listed edges added (existing edges are an error).
    pub fn with_edges_added(&self, extra: &[(usize, usize)]) -> Result<Graph> {
        let mut edges = self.edges.clone();
        edges.extend_from_slice(extra);
        Graph::from_edges(self.n, &edges)
    }

    /// Copy with the listed edges removed (missing edges are ignored).
    pub fn with_edges_removed(&self, remove: &[(usize, usize)]) -> Result<Graph> {
        let drop: Vec<_> = remove.iter().map(|&(a, b)| (a.min(b), a.max(b))).collect();
        let edges: Vec<_> = self
            .edges
            .iter()
            .copied()
            .filter(|e| !drop.contains(e))
            .collect();
        Graph::from_edges(self.n, &edges)
    }
}

fn components_and_coloring(neighbors: &[Vec<usize>]) -> (Vec<Vec<usize>>, bool) {
    let n = neighbors.len();
    let mut color: Vec<Option<bool>> = vec![None; n];
    let mut components = Vec::new();
    let mut bipartite = true;
    for start in 0..n {
        if color[start].is_some() {
            continue;
        }
        let mut members = vec![start];
        color[start] = Some(false);
        let mut queue = VecDeque::from([start]);
        while let Some(x) = queue.pop_front() {
            let cx = color[x].expect("colored");
            for &y in &neighbors[x] {
                match color[y] {
                    None => {
                        color[y] = Some(!cx);
                        members.push(y);
                        queue.push_back(y);
                    }
                    Some(cy) if cy == cx => bipartite = false,
                    Some(_) => {}
                }
            }
        }
        members.sort_unstable();
        components.push(members);
    }
    (components, bipartite)
}
