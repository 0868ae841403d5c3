//! Undirected simple graphs in compressed adjacency form, BFS, and K-hop ego
//! networks with identity coloring.

use std::collections::{BTreeMap, VecDeque};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{input, Result};

/// Dense 0-based node index.
pub type NodeId = usize;

/// Immutable undirected simple graph.
///
/// Edges are stored once as `(u, v)` with `u < v`, sorted. Neighbor lists are
/// kept in compressed form (offsets into one flat array), each sorted
/// ascending. `slot_edge` maps every adjacency slot back to its edge index so
/// per-edge payloads can be looked up from either endpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    num_nodes: usize,
    edges: Vec<(NodeId, NodeId)>,
    offsets: Vec<usize>,
    neighbors: Vec<NodeId>,
    slot_edge: Vec<usize>,
    node_features: Option<Array2<f64>>,
    edge_features: Option<Array2<f64>>,
}

impl Graph {
    /// Builds a graph from a raw edge list. Self-loops are dropped and
    /// duplicate edges (in either orientation) are collapsed.
    pub fn new(num_nodes: usize, edges: &[(NodeId, NodeId)]) -> Result<Self> {
        Self::build(num_nodes, edges, None)
    }

    pub fn build(
        num_nodes: usize,
        edges: &[(NodeId, NodeId)],
        node_features: Option<Array2<f64>>,
    ) -> Result<Self> {
        for &(u, v) in edges {
            if u >= num_nodes || v >= num_nodes {
                return input(format!(
                    "edge ({u}, {v}) has an endpoint outside 0..{num_nodes}"
                ));
            }
        }
        if let Some(x) = &node_features {
            if x.nrows() != num_nodes {
                return input(format!(
                    "node feature matrix has {} rows, expected {num_nodes}",
                    x.nrows()
                ));
            }
            if x.iter().any(|v| !v.is_finite()) {
                return input("node features must be finite");
            }
        }
        let mut canon: Vec<(NodeId, NodeId)> = edges
            .iter()
            .filter(|(u, v)| u != v)
            .map(|&(u, v)| (u.min(v), u.max(v)))
            .collect();
        canon.sort_unstable();
        canon.dedup();

        let mut degree = vec![0usize; num_nodes];
        for &(u, v) in &canon {
            degree[u] += 1;
            degree[v] += 1;
        }
        let mut offsets = Vec::with_capacity(num_nodes + 1);
        offsets.push(0);
        for d in &degree {
            offsets.push(offsets.last().unwrap() + d);
        }
        let mut fill = offsets[..num_nodes].to_vec();
        let mut adj = vec![(0usize, 0usize); offsets[num_nodes]];
        for (e, &(u, v)) in canon.iter().enumerate() {
            adj[fill[u]] = (v, e);
            fill[u] += 1;
            adj[fill[v]] = (u, e);
            fill[v] += 1;
        }
        for v in 0..num_nodes {
            adj[offsets[v]..offsets[v + 1]].sort_unstable();
        }
        let (neighbors, slot_edge) = adj.into_iter().unzip();
        Ok(Self {
            num_nodes,
            edges: canon,
            offsets,
            neighbors,
            slot_edge,
            node_features,
            edge_features: None,
        })
    }

    /// Attaches one feature vector per edge. Every edge must be covered and
    /// all vectors must share one length.
    pub fn with_edge_features(
        mut self,
        features: &BTreeMap<(NodeId, NodeId), Vec<f64>>,
    ) -> Result<Self> {
        let dim = match features.values().next() {
            Some(f) => f.len(),
            None if self.edges.is_empty() => 0,
            None => return input("edge feature map is empty"),
        };
        let mut out = Array2::zeros((self.edges.len(), dim));
        let mut seen = vec![false; self.edges.len()];
        for (&(u, v), f) in features {
            if f.len() != dim {
                return input("edge feature vectors differ in length");
            }
            let key = (u.min(v), u.max(v));
            let Ok(e) = self.edges.binary_search(&key) else {
                return input(format!("edge feature given for non-edge ({u}, {v})"));
            };
            seen[e] = true;
            for (j, x) in f.iter().enumerate() {
                out[[e, j]] = *x;
            }
        }
        if seen.iter().any(|s| !s) {
            return input("every edge needs a feature vector");
        }
        self.edge_features = Some(out);
        Ok(self)
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    /// Canonical edge list, `u < v`, sorted.
    pub fn edges(&self) -> &[(NodeId, NodeId)] {
        &self.edges
    }

    pub fn neighbors(&self, v: NodeId) -> &[NodeId] {
        &self.neighbors[self.offsets[v]..self.offsets[v + 1]]
    }

    /// Positions of `v`'s neighbors in the flat adjacency array. Message
    /// passing uses these as directed-edge ids.
    pub fn slots(&self, v: NodeId) -> std::ops::Range<usize> {
        self.offsets[v]..self.offsets[v + 1]
    }

    pub fn num_slots(&self) -> usize {
        self.neighbors.len()
    }

    /// Neighbor stored at an adjacency slot.
    pub fn slot_target(&self, slot: usize) -> NodeId {
        self.neighbors[slot]
    }

    /// Edge index stored at an adjacency slot.
    pub fn slot_edge(&self, slot: usize) -> usize {
        self.slot_edge[slot]
    }

    /// Edge indices aligned with [`Graph::neighbors`].
    pub fn neighbor_edges(&self, v: NodeId) -> &[usize] {
        &self.slot_edge[self.offsets[v]..self.offsets[v + 1]]
    }

    pub fn degree(&self, v: NodeId) -> usize {
        self.offsets[v + 1] - self.offsets[v]
    }

    pub fn degrees(&self) -> Vec<usize> {
        (0..self.num_nodes).map(|v| self.degree(v)).collect()
    }

    pub fn has_edge(&self, u: NodeId, v: NodeId) -> bool {
        u < self.num_nodes && v < self.num_nodes && self.neighbors(u).binary_search(&v).is_ok()
    }

    pub fn node_features(&self) -> Option<&Array2<f64>> {
        self.node_features.as_ref()
    }

    pub fn edge_features(&self) -> Option<&Array2<f64>> {
        self.edge_features.as_ref()
    }

    /// Returns a copy carrying `features` as its node feature matrix.
    pub fn with_node_features(&self, features: Array2<f64>) -> Result<Self> {
        let mut g = Self::build(self.num_nodes, &self.edges, Some(features))?;
        g.edge_features = self.edge_features.clone();
        Ok(g)
    }

    /// Some(d) if every node has degree d. The empty graph is not regular.
    pub fn regular_degree(&self) -> Option<usize> {
        if self.num_nodes == 0 {
            return None;
        }
        let d = self.degree(0);
        (1..self.num_nodes)
            .all(|v| self.degree(v) == d)
            .then_some(d)
    }

    fn check_node(&self, v: NodeId) -> Result<()> {
        if v >= self.num_nodes {
            return input(format!("node {v} out of range 0..{}", self.num_nodes));
        }
        Ok(())
    }

    /// Hop distances from `source`, `None` for nodes farther than `cap` or
    /// unreachable.
    pub fn bfs_distances(&self, source: NodeId, cap: usize) -> Result<Vec<Option<usize>>> {
        self.check_node(source)?;
        let mut dist = vec![None; self.num_nodes];
        dist[source] = Some(0);
        let mut queue = VecDeque::from([source]);
        while let Some(u) = queue.pop_front() {
            let du = dist[u].unwrap();
            if du == cap {
                continue;
            }
            for &w in self.neighbors(u) {
                if dist[w].is_none() {
                    dist[w] = Some(du + 1);
                    queue.push_back(w);
                }
            }
        }
        Ok(dist)
    }

    /// Induced subgraph on `nodes` (must be sorted and distinct). Node and
    /// edge features are carried over; local ids follow the order of `nodes`.
    pub fn induced_subgraph(&self, nodes: &[NodeId]) -> Result<Self> {
        let mut local = vec![usize::MAX; self.num_nodes];
        for (i, &v) in nodes.iter().enumerate() {
            self.check_node(v)?;
            if i > 0 && nodes[i - 1] >= v {
                return input("induced_subgraph expects sorted distinct nodes");
            }
            local[v] = i;
        }
        let mut edges = Vec::new();
        let mut edge_rows = Vec::new();
        for (e, &(u, v)) in self.edges.iter().enumerate() {
            if local[u] != usize::MAX && local[v] != usize::MAX {
                edges.push((local[u], local[v]));
                edge_rows.push(e);
            }
        }
        let features = self
            .node_features
            .as_ref()
            .map(|x| x.select(ndarray::Axis(0), nodes));
        let mut g = Self::build(nodes.len(), &edges, features)?;
        if let Some(ef) = &self.edge_features {
            // local order preserves parent order, so kept edges stay sorted
            g.edge_features = Some(ef.select(ndarray::Axis(0), &edge_rows));
        }
        Ok(g)
    }

    /// Relabels node `v` as `perm[v]`.
    pub fn permute(&self, perm: &[NodeId]) -> Result<Self> {
        if perm.len() != self.num_nodes {
            return input("permutation length differs from node count");
        }
        let mut seen = vec![false; self.num_nodes];
        for &p in perm {
            if p >= self.num_nodes || std::mem::replace(&mut seen[p], true) {
                return input("not a permutation");
            }
        }
        let edges: Vec<_> = self
            .edges
            .iter()
            .map(|&(u, v)| (perm[u], perm[v]))
            .collect();
        let features = self.node_features.as_ref().map(|x| {
            let mut out = Array2::zeros(x.raw_dim());
            for v in 0..self.num_nodes {
                out.row_mut(perm[v]).assign(&x.row(v));
            }
            out
        });
        let mut g = Self::build(self.num_nodes, &edges, features)?;
        if let Some(ef) = &self.edge_features {
            let mut out = Array2::zeros(ef.raw_dim());
            for (e, &(u, v)) in self.edges.iter().enumerate() {
                let (a, b) = (perm[u].min(perm[v]), perm[u].max(perm[v]));
                let ne = g.edges.binary_search(&(a, b)).unwrap();
                out.row_mut(ne).assign(&ef.row(e));
            }
            g.edge_features = Some(out);
        }
        Ok(g)
    }

    /// K-hop ego network around `center`.
    ///
    /// The ego network is the induced subgraph on every node within `k` hops,
    /// including edges between two nodes that both sit at distance exactly
    /// `k`. The identity mask marks `identity_at` (default: the center). When
    /// the conditioning node lies outside the ball no node is marked, and
    /// message passing on the ego runs exactly like a plain GNN.
    pub fn extract_ego(
        &self,
        center: NodeId,
        k: usize,
        identity_at: Option<NodeId>,
    ) -> Result<EgoNet> {
        self.check_node(center)?;
        if let Some(t) = identity_at {
            self.check_node(t)?;
        }
        let dist = self.bfs_distances(center, k)?;
        let members: Vec<NodeId> = (0..self.num_nodes).filter(|&v| dist[v].is_some()).collect();
        let subgraph = self.induced_subgraph(&members)?;
        let local_of = |p: NodeId| members.binary_search(&p).ok();
        let center_local = local_of(center).unwrap();
        let identity = local_of(identity_at.unwrap_or(center));
        Ok(EgoNet {
            subgraph,
            center: center_local,
            to_parent: members,
            identity,
        })
    }
}

/// Induced K-hop subgraph around a center node plus its identity coloring.
///
/// At most one local node carries the identity mark. It is exactly one unless
/// the ego was built for a conditioning node outside the ball.
#[derive(Debug, Clone, PartialEq)]
pub struct EgoNet {
    pub subgraph: Graph,
    /// Local index of the center node.
    pub center: NodeId,
    /// Local id -> parent id, strictly increasing.
    pub to_parent: Vec<NodeId>,
    /// Local index of the identity-colored node, if it is inside the ball.
    pub identity: Option<NodeId>,
}

impl EgoNet {
    pub fn identity_mask(&self) -> Vec<bool> {
        (0..self.subgraph.num_nodes())
            .map(|v| Some(v) == self.identity)
            .collect()
    }

    pub fn to_local(&self, parent: NodeId) -> Option<NodeId> {
        self.to_parent.binary_search(&parent).ok()
    }
}

/// JSON form of a graph: `{"num_nodes", "edges", "node_features"?}`.
///
/// Edge features, when present, are listed in the same order as `edges`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GraphJson {
    pub num_nodes: usize,
    pub edges: Vec<[NodeId; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub node_features: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edge_features: Option<Vec<Vec<f64>>>,
}

pub(crate) fn rows_to_matrix(rows: &[Vec<f64>]) -> Result<Array2<f64>> {
    let cols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != cols) {
        return input("ragged feature matrix");
    }
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    Ok(Array2::from_shape_vec((rows.len(), cols), flat).expect("shape checked"))
}

pub(crate) fn matrix_to_rows(m: &Array2<f64>) -> Vec<Vec<f64>> {
    m.rows().into_iter().map(|r| r.to_vec()).collect()
}

impl GraphJson {
    pub fn into_graph(self) -> Result<Graph> {
        let edges: Vec<_> = self.edges.iter().map(|e| (e[0], e[1])).collect();
        let features = self
            .node_features
            .as_deref()
            .map(rows_to_matrix)
            .transpose()?;
        let g = Graph::build(self.num_nodes, &edges, features)?;
        match self.edge_features {
            None => Ok(g),
            Some(ef) => {
                if ef.len() != edges.len() {
                    return input("edge_features must align with edges");
                }
                let mut map = BTreeMap::new();
                for (&(u, v), f) in edges.iter().zip(ef) {
                    if u != v {
                        map.entry((u.min(v), u.max(v))).or_insert(f);
                    }
                }
                g.with_edge_features(&map)
            }
        }
    }
}

impl From<&Graph> for GraphJson {
    fn from(g: &Graph) -> Self {
        Self {
            num_nodes: g.num_nodes,
            edges: g.edges.iter().map(|&(u, v)| [u, v]).collect(),
            node_features: g.node_features.as_ref().map(matrix_to_rows),
            edge_features: g.edge_features.as_ref().map(matrix_to_rows),
        }
    }
}
