//! 1-WL color refinement, WL graph hashing and exact isomorphism testing.
//!
//! Colors are canonical: after each round the distinct refinement signatures
//! `(own color, sorted neighbor colors)` are sorted and numbered by rank. Two
//! graphs whose signature histograms agree round by round therefore use the
//! same color ids for the same signatures, which is what lets the
//! isomorphism search compare colors across graphs.

use std::hash::Hasher;

use fnv::FnvHasher;
use serde::{Deserialize, Serialize};

use crate::error::{input, Error, Result};
use crate::graph::{Graph, NodeId};

/// Largest graph [`are_isomorphic`] accepts.
pub const MAX_ISO_NODES: usize = 128;

/// Name of the digest used by [`wl_graph_hash`], recorded in reports.
pub const HASH_NAME: &str = "FNV-1a 64 over per-round canonical WL signature histograms";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WlColoring {
    /// Stable color per node, dense from 0.
    pub colors: Vec<usize>,
    /// Refinement rounds executed, including the final round that confirmed
    /// stability.
    pub num_rounds: usize,
    /// `(color, count)` sorted by color.
    pub histogram: Vec<(usize, usize)>,
}

type Signature = (usize, Vec<usize>);

struct Refinement {
    colors: Vec<usize>,
    rounds: usize,
    /// One entry per round (round 0 is the initial coloring): the sorted
    /// distinct signatures with their multiplicities.
    history: Vec<Vec<(Signature, usize)>>,
}

fn canonical_initial(init: &[usize]) -> (Vec<usize>, Vec<(Signature, usize)>) {
    let mut distinct: Vec<usize> = init.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    let colors: Vec<usize> = init
        .iter()
        .map(|c| distinct.binary_search(c).unwrap())
        .collect();
    let mut counts = vec![0usize; distinct.len()];
    for &c in &colors {
        counts[c] += 1;
    }
    let hist = distinct
        .iter()
        .zip(counts)
        .map(|(&c, n)| ((c, Vec::new()), n))
        .collect();
    (colors, hist)
}

fn refine(g: &Graph, init: &[usize]) -> Refinement {
    let n = g.num_nodes();
    let (mut colors, hist0) = canonical_initial(init);
    let mut num_colors = hist0.len();
    let mut history = vec![hist0];
    let mut rounds = 0;
    loop {
        rounds += 1;
        let sigs: Vec<Signature> = (0..n)
            .map(|v| {
                let mut nc: Vec<usize> = g.neighbors(v).iter().map(|&u| colors[u]).collect();
                nc.sort_unstable();
                (colors[v], nc)
            })
            .collect();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| sigs[a].cmp(&sigs[b]));
        let mut next = vec![0usize; n];
        let mut hist: Vec<(Signature, usize)> = Vec::new();
        for &v in &order {
            match hist.last_mut() {
                Some((s, count)) if *s == sigs[v] => *count += 1,
                _ => hist.push((sigs[v].clone(), 1)),
            }
            next[v] = hist.len() - 1;
        }
        let grew = hist.len() > num_colors;
        num_colors = hist.len();
        colors = next;
        history.push(hist);
        if !grew {
            break;
        }
    }
    Refinement {
        colors,
        rounds,
        history,
    }
}

/// Runs 1-WL refinement to a stable partition. Without `init_colors` every
/// node starts with the same color.
pub fn wl_refine(g: &Graph, init_colors: Option<&[usize]>) -> Result<WlColoring> {
    let uniform;
    let init = match init_colors {
        Some(c) if c.len() != g.num_nodes() => {
            return input("init_colors length differs from num_nodes")
        }
        Some(c) => c,
        None => {
            uniform = vec![0; g.num_nodes()];
            &uniform
        }
    };
    let r = refine(g, init);
    let mut histogram: Vec<(usize, usize)> = Vec::new();
    let mut sorted = r.colors.clone();
    sorted.sort_unstable();
    for c in sorted {
        match histogram.last_mut() {
            Some((h, n)) if *h == c => *n += 1,
            _ => histogram.push((c, 1)),
        }
    }
    Ok(WlColoring {
        colors: r.colors,
        num_rounds: r.rounds,
        histogram,
    })
}

fn digest_history(n: usize, history: &[Vec<(Signature, usize)>]) -> u64 {
    let mut h = FnvHasher::default();
    h.write(&(n as u64).to_le_bytes());
    for round in history {
        h.write(&(round.len() as u64).to_le_bytes());
        for ((own, nbrs), count) in round {
            h.write(&(*own as u64).to_le_bytes());
            h.write(&(nbrs.len() as u64).to_le_bytes());
            for c in nbrs {
                h.write(&(*c as u64).to_le_bytes());
            }
            h.write(&(*count as u64).to_le_bytes());
        }
    }
    h.finish()
}

/// 64-bit digest of the WL signature histograms of every round up to
/// stability, starting from uniform colors.
///
/// Rounds past stability only rename colors, so hashing up to stability is
/// equivalent to hashing a fixed `num_nodes` rounds.
pub fn wl_graph_hash(g: &Graph) -> u64 {
    let r = refine(g, &vec![0; g.num_nodes()]);
    digest_history(g.num_nodes(), &r.history)
}

fn disjoint_union(a: &Graph, b: &Graph) -> Graph {
    let off = a.num_nodes();
    let edges: Vec<_> = a
        .edges()
        .iter()
        .copied()
        .chain(b.edges().iter().map(|&(u, v)| (u + off, v + off)))
        .collect();
    Graph::new(a.num_nodes() + b.num_nodes(), &edges).expect("union of valid graphs")
}

struct IsoSearch<'a> {
    union: Graph,
    n: usize,
    g1: &'a Graph,
    g2: &'a Graph,
}

impl IsoSearch<'_> {
    /// Refines `colors` on the union and reports whether both sides carry the
    /// same color histogram.
    fn refine_balanced(&self, colors: &[usize]) -> Option<Vec<usize>> {
        let r = refine(&self.union, colors);
        let k = r.history.last().unwrap().len();
        let mut count = vec![0i64; k];
        for (v, &c) in r.colors.iter().enumerate() {
            count[c] += if v < self.n { 1 } else { -1 };
        }
        count.iter().all(|&c| c == 0).then_some(r.colors)
    }

    fn search(&self, colors: Vec<usize>) -> bool {
        let n = self.n;
        let k = colors.iter().max().map_or(0, |c| c + 1);
        let mut size = vec![0usize; k];
        for &c in &colors[..n] {
            size[c] += 1;
        }
        let target = (0..k)
            .filter(|&c| size[c] > 1)
            .min_by_key(|&c| (size[c], c));
        let Some(cell) = target else {
            // discrete: the coloring pins down the only candidate bijection
            let mut map = vec![0; n];
            let mut by_color = vec![usize::MAX; k];
            for v in 0..n {
                by_color[colors[n + v]] = v;
            }
            for v in 0..n {
                map[v] = by_color[colors[v]];
            }
            return self
                .g1
                .edges()
                .iter()
                .all(|&(u, v)| self.g2.has_edge(map[u], map[v]));
        };
        let u = (0..n).find(|&v| colors[v] == cell).unwrap();
        for w in (0..n).filter(|&w| colors[n + w] == cell) {
            let mut c = colors.clone();
            c[u] = k;
            c[n + w] = k;
            if let Some(refined) = self.refine_balanced(&c) {
                if self.search(refined) {
                    return true;
                }
            }
        }
        false
    }
}

/// Exact isomorphism test by individualization and WL refinement.
///
/// Both graphs are refined jointly (as one disjoint union) so colors are
/// comparable; a branch pins one node of the first graph to a same-colored
/// node of the second, refines again, and prunes as soon as the two sides'
/// color histograms disagree.
pub fn are_isomorphic(g1: &Graph, g2: &Graph) -> Result<bool> {
    let n = g1.num_nodes();
    if n.max(g2.num_nodes()) > MAX_ISO_NODES {
        return Err(Error::Capability(format!(
            "isomorphism search limited to {MAX_ISO_NODES} nodes"
        )));
    }
    if n != g2.num_nodes() || g1.num_edges() != g2.num_edges() {
        return Ok(false);
    }
    let mut d1 = g1.degrees();
    let mut d2 = g2.degrees();
    d1.sort_unstable();
    d2.sort_unstable();
    if d1 != d2 {
        return Ok(false);
    }
    let search = IsoSearch {
        union: disjoint_union(g1, g2),
        n,
        g1,
        g2,
    };
    Ok(match search.refine_balanced(&vec![0; 2 * n]) {
        Some(colors) => search.search(colors),
        None => false,
    })
}

/// Keeps the first graph of every isomorphism class, returning kept indices.
pub fn dedupe_isomorphic(graphs: &[Graph]) -> Result<Vec<usize>> {
    let mut kept: Vec<usize> = Vec::new();
    let hashes: Vec<u64> = graphs.iter().map(wl_graph_hash).collect();
    'outer: for (i, g) in graphs.iter().enumerate() {
        for &j in &kept {
            if hashes[i] == hashes[j] && are_isomorphic(g, &graphs[j])? {
                continue 'outer;
            }
        }
        kept.push(i);
    }
    Ok(kept)
}

/// Nodes of `g` grouped by stable color, for diagnostics.
pub fn color_classes(c: &WlColoring) -> Vec<Vec<NodeId>> {
    let k = c.histogram.len();
    let mut out = vec![Vec::new(); k];
    for (v, &col) in c.colors.iter().enumerate() {
        out[col].push(v);
    }
    out
}
