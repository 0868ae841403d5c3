//! Parameter-free identity-aware constructions in exact integer arithmetic.
//!
//! - [`lemma1_embeddings`] runs heterogeneous message passing with the fixed
//!   "shift and inject" weights, producing per-node walk counts to the
//!   identity node.
//! - [`walk_count_features`] computes `Diag(A^j)` for `j = 1..=k`, the closed
//!   walk counts used as augmented node features.
//! - clustering coefficients are recovered from closed walk counts and
//!   checked against the triangle-count definition.
//! - [`reachability`] is the max-aggregation propagation that marks nodes
//!   reachable from a conditioning node.
//!
//! All counts are walk counts. Overflow is reported, never wrapped.

use num_rational::Ratio;

use crate::error::{input, Error, Result};
use crate::graph::{EgoNet, Graph, NodeId};

/// Walk counts towards an identity node.
///
/// `counts[u][j - 1]` is the number of length-`j` walks from `u` that end at
/// `identity_node`, for `j = 1..=k_max`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountMatrix {
    pub counts: Vec<Vec<u64>>,
    pub identity_node: NodeId,
    pub k_max: usize,
}

impl CountMatrix {
    /// Row of the identity node: its closed walk counts.
    pub fn identity_row(&self) -> &[u64] {
        &self.counts[self.identity_node]
    }
}

fn overflow() -> Error {
    Error::Numeric("walk count overflowed u64".into())
}

/// Heterogeneous message passing with the walk-counting weight assignment.
///
/// Layer 1 sends the constant 1 from the identity node and 0 from every other
/// node. Every later layer shifts the sender's vector one slot down and
/// injects the identity indicator in slot 0. Aggregation is a plain sum over
/// neighbors. After `j` layers, slot `i` holds the number of length-`i+1`
/// walks to the identity node.
pub fn walk_counts_to(g: &Graph, identity: NodeId, k: usize) -> Result<CountMatrix> {
    let n = g.num_nodes();
    if identity >= n {
        return input(format!("identity node {identity} out of range"));
    }
    if k == 0 {
        return input("k must be at least 1");
    }
    let mut h = vec![vec![0u64; k]; n];
    for layer in 1..=k {
        let msg: Vec<Vec<u64>> = (0..n)
            .map(|s| {
                let mut m = vec![0u64; k];
                m[1..layer].copy_from_slice(&h[s][..layer - 1]);
                m[0] = u64::from(s == identity);
                m
            })
            .collect();
        for (u, row) in h.iter_mut().enumerate() {
            let mut acc = vec![0u64; k];
            for &s in g.neighbors(u) {
                for (a, m) in acc.iter_mut().zip(&msg[s]) {
                    *a = a.checked_add(*m).ok_or_else(overflow)?;
                }
            }
            *row = acc;
        }
    }
    Ok(CountMatrix {
        counts: h,
        identity_node: identity,
        k_max: k,
    })
}

/// Walk-count embeddings on an ego network, relative to its identity node.
pub fn lemma1_embeddings(ego: &EgoNet, k: usize) -> Result<CountMatrix> {
    let Some(id) = ego.identity else {
        return input("ego network has no identity-colored node");
    };
    walk_counts_to(&ego.subgraph, id, k)
}

/// Closed walk counts: row `v`, column `j - 1` is `Diag(A^j)[v]`.
///
/// Each row is produced by `j` sparse matrix-vector products starting from
/// the indicator of `v`.
pub fn walk_count_features(g: &Graph, k: usize) -> Result<Vec<Vec<u64>>> {
    if k == 0 {
        return input("k must be at least 1");
    }
    let n = g.num_nodes();
    let mut out = vec![vec![0u64; k]; n];
    let mut x = vec![0u64; n];
    let mut y = vec![0u64; n];
    for v in 0..n {
        x.iter_mut().for_each(|e| *e = 0);
        x[v] = 1;
        for j in 0..k {
            for (u, yu) in y.iter_mut().enumerate() {
                let mut acc = 0u64;
                for &w in g.neighbors(u) {
                    acc = acc.checked_add(x[w]).ok_or_else(overflow)?;
                }
                *yu = acc;
            }
            std::mem::swap(&mut x, &mut y);
            out[v][j] = x[v];
        }
    }
    Ok(out)
}

/// Clustering coefficient from closed walk counts `[c1, c2, c3, ..]`, where
/// `c2` is the degree and `c3` is twice the number of triangles at the node:
/// `c3 / (c2 (c2 - 1))`. Zero when the degree is below 2.
pub fn clustering_ratio_from_counts(row: &[u64]) -> Result<Ratio<u64>> {
    if row.len() < 3 {
        return input("clustering from counts needs at least three walk lengths");
    }
    let d = row[1];
    if d < 2 {
        return Ok(Ratio::from_integer(0));
    }
    Ok(Ratio::new(row[2], d * (d - 1)))
}

pub fn clustering_from_counts(row: &[u64]) -> Result<f64> {
    clustering_ratio_from_counts(row).map(ratio_to_f64)
}

/// Clustering coefficient by counting edges among neighbors.
pub fn clustering_direct_ratio(g: &Graph, v: NodeId) -> Result<Ratio<u64>> {
    if v >= g.num_nodes() {
        return input(format!("node {v} out of range"));
    }
    let nb = g.neighbors(v);
    let d = nb.len() as u64;
    if d < 2 {
        return Ok(Ratio::from_integer(0));
    }
    let mut links = 0u64;
    for (i, &a) in nb.iter().enumerate() {
        for &b in &nb[i + 1..] {
            if g.has_edge(a, b) {
                links += 1;
            }
        }
    }
    Ok(Ratio::new(links, d * (d - 1) / 2))
}

pub fn clustering_direct(g: &Graph, v: NodeId) -> Result<f64> {
    clustering_direct_ratio(g, v).map(ratio_to_f64)
}

/// Correctly rounded value of a small rational.
pub fn ratio_to_f64(r: Ratio<u64>) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// Max-aggregation reachability propagation conditioned on `v`.
///
/// State starts at 0 everywhere. Each round, the conditioning node sends the
/// constant 1 and every other node forwards its previous state; each node
/// takes the max over its neighbors. Returns whether `u` holds 1 after `k`
/// rounds.
///
/// For `u != v` this is "within `k` hops". For `u == v` the answer is true for
/// `k >= 2` exactly when `v` has a neighbor (a closed walk returns to it), and
/// false for `k <= 1`; this differs from the zero-hop reading.
pub fn reachability(g: &Graph, u: NodeId, v: NodeId, k: usize) -> Result<bool> {
    let n = g.num_nodes();
    if u >= n || v >= n {
        return input("reachability node out of range");
    }
    let mut h = vec![0u8; n];
    let mut next = vec![0u8; n];
    for _ in 0..k {
        for (w, nw) in next.iter_mut().enumerate() {
            *nw = g
                .neighbors(w)
                .iter()
                .map(|&s| if s == v { 1 } else { h[s] })
                .max()
                .unwrap_or(0);
        }
        std::mem::swap(&mut h, &mut next);
    }
    Ok(h[u] == 1)
}

/// Canonical byte string of the sorted multiset of closed-walk rows.
///
/// Layout: `num_nodes` and `k` as little-endian u64, then each row (after
/// lexicographic sorting) as `k` little-endian u64 values.
pub fn graph_signature(g: &Graph, k: usize) -> Result<Vec<u8>> {
    let mut rows = walk_count_features(g, k)?;
    rows.sort_unstable();
    let mut out = Vec::with_capacity(16 + 8 * k * rows.len());
    out.extend_from_slice(&(g.num_nodes() as u64).to_le_bytes());
    out.extend_from_slice(&(k as u64).to_le_bytes());
    for row in rows {
        for x in row {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn k3() -> Graph {
        Graph::new(3, &[(0, 1), (1, 2), (0, 2)]).unwrap()
    }

    #[test]
    fn triangle_walk_counts() {
        let ego = k3().extract_ego(0, 3, None).unwrap();
        let c = lemma1_embeddings(&ego, 3).unwrap();
        assert_eq!(c.identity_row(), &[0, 2, 2]);
        assert_eq!(c.counts[1], vec![1, 1, 3]);
        assert_eq!(c.counts[2], vec![1, 1, 3]);
    }

    #[test]
    fn single_edge_walk_counts() {
        let g = Graph::new(2, &[(0, 1)]).unwrap();
        let c = walk_counts_to(&g, 1, 3).unwrap();
        assert_eq!(c.counts[0], vec![1, 0, 1]);
        assert_eq!(c.counts[1], vec![0, 1, 0]);
    }

    #[test]
    fn isolated_node_has_no_walks() {
        let g = Graph::new(1, &[]).unwrap();
        let ego = g.extract_ego(0, 4, None).unwrap();
        assert_eq!(lemma1_embeddings(&ego, 4).unwrap().counts, vec![vec![0; 4]]);
    }

    #[test]
    fn missing_identity_is_an_error() {
        let p = Graph::new(4, &[(0, 1), (1, 2), (2, 3)]).unwrap();
        let ego = p.extract_ego(0, 2, Some(3)).unwrap();
        assert!(lemma1_embeddings(&ego, 2).is_err());
    }

    #[test]
    fn closed_walks_on_triangle() {
        let f = walk_count_features(&k3(), 3).unwrap();
        assert!(f.iter().all(|r| r == &[0, 2, 2]));
    }

    #[test]
    fn second_column_is_degree_and_triangle_free_has_no_closed_3_walks() {
        let g = Graph::new(5, &[(0, 1), (1, 2), (2, 3), (3, 0), (0, 4)]).unwrap();
        let f = walk_count_features(&g, 3).unwrap();
        for v in 0..5 {
            assert_eq!(f[v][1], g.degree(v) as u64);
            assert_eq!(f[v][2], 0);
        }
    }

    #[test]
    fn clustering_examples() {
        assert_eq!(clustering_from_counts(&[0, 2, 2]).unwrap(), 1.0);
        assert_eq!(clustering_from_counts(&[0, 3, 0]).unwrap(), 0.0);
        assert_eq!(
            clustering_ratio_from_counts(&[0, 3, 2]).unwrap(),
            Ratio::new(1, 3)
        );
        assert_eq!(clustering_from_counts(&[0, 1, 0]).unwrap(), 0.0);
        assert!(clustering_from_counts(&[0, 1]).is_err());
    }

    #[test]
    fn clustering_direct_examples() {
        assert_eq!(clustering_direct(&k3(), 1).unwrap(), 1.0);
        let p3 = Graph::new(3, &[(0, 1), (1, 2)]).unwrap();
        assert_eq!(clustering_direct(&p3, 1).unwrap(), 0.0);
        let k4 = Graph::new(4, &[(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]).unwrap();
        assert_eq!(clustering_direct(&k4, 2).unwrap(), 1.0);
        // paw: triangle 0-1-2 plus pendant 3 on hub 0
        let paw = Graph::new(4, &[(0, 1), (1, 2), (0, 2), (0, 3)]).unwrap();
        assert_eq!(clustering_direct_ratio(&paw, 0).unwrap(), Ratio::new(1, 3));
    }

    #[test]
    fn reachability_on_path() {
        let g = Graph::new(3, &[(0, 1), (1, 2)]).unwrap();
        assert!(reachability(&g, 2, 0, 2).unwrap());
        assert!(!reachability(&g, 2, 0, 1).unwrap());
        assert!(reachability(&g, 0, 0, 2).unwrap());
        assert!(!reachability(&g, 0, 0, 1).unwrap());
        let split = Graph::new(4, &[(0, 1), (2, 3)]).unwrap();
        assert!(!reachability(&split, 3, 0, 6).unwrap());
        let lonely = Graph::new(1, &[]).unwrap();
        assert!(!reachability(&lonely, 0, 0, 3).unwrap());
    }

    #[test]
    fn signature_separates_wl_blind_pair() {
        let two_k3 = Graph::new(6, &[(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)]).unwrap();
        let c6 = Graph::new(6, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (5, 0)]).unwrap();
        assert_ne!(
            graph_signature(&two_k3, 3).unwrap(),
            graph_signature(&c6, 3).unwrap()
        );
        let relabeled = c6.permute(&[2, 0, 5, 1, 3, 4]).unwrap();
        assert_eq!(
            graph_signature(&c6, 4).unwrap(),
            graph_signature(&relabeled, 4).unwrap()
        );
    }

    #[test]
    fn overflow_is_reported() {
        let n = 60;
        let mut edges = Vec::new();
        for u in 0..n {
            for v in u + 1..n {
                edges.push((u, v));
            }
        }
        let g = Graph::new(n, &edges).unwrap();
        assert!(matches!(
            walk_count_features(&g, 12),
            Err(Error::Numeric(_))
        ));
    }
}
