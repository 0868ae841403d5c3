//! Seeded synthetic graph generators.
//!
//! All generators are pure functions of their parameters and seed. Datasets
//! derive one child seed per graph with [`crate::rng::child_seed`].

use std::collections::BTreeSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{input, Error, Result};
use crate::graph::{Graph, NodeId};
use crate::rng::{child_seed, rng_from_seed};

/// Restart budget for the pairing model before giving up.
pub const MAX_PAIRING_RESTARTS: u64 = 5_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    DRegular,
    SmallWorld,
    ScaleFree,
}

/// Parameters of one generator call.
///
/// `degree_param` is `d` for d-regular graphs, the ring neighbor count `k`
/// for small-world graphs and the attachment count `m` for scale-free graphs.
/// `prob` is the rewiring probability or the triad-formation probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub family: Family,
    pub num_nodes: usize,
    pub degree_param: usize,
    pub prob: f64,
    pub seed: u64,
}

impl GeneratorSpec {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.prob) {
            return input(format!("probability {} outside [0, 1]", self.prob));
        }
        let (n, p) = (self.num_nodes, self.degree_param);
        match self.family {
            Family::DRegular => {
                if p >= n {
                    return input(format!("d-regular needs d < n, got d={p}, n={n}"));
                }
                if (n * p) % 2 != 0 {
                    return input(format!("d-regular needs n*d even, got {n}*{p} = {}", n * p));
                }
            }
            Family::SmallWorld => {
                if p % 2 != 0 || p >= n {
                    return input(format!("small-world needs even k < n, got k={p}, n={n}"));
                }
            }
            Family::ScaleFree => {
                if p < 1 || p >= n {
                    return input(format!("scale-free needs 1 <= m < n, got m={p}, n={n}"));
                }
            }
        }
        Ok(())
    }

    pub fn generate(&self) -> Result<Graph> {
        self.validate()?;
        match self.family {
            Family::DRegular => gen_d_regular(self.num_nodes, self.degree_param, self.seed),
            Family::SmallWorld => {
                gen_small_world(self.num_nodes, self.degree_param, self.prob, self.seed)
            }
            Family::ScaleFree => {
                gen_scale_free(self.num_nodes, self.degree_param, self.prob, self.seed)
            }
        }
    }
}

/// Uniform random d-regular graph from the configuration (pairing) model.
///
/// Points are paired one at a time; a self-loop or repeated edge discards the
/// whole pairing and starts over. Accepted pairings are uniform over simple
/// d-regular graphs.
pub fn gen_d_regular(n: usize, d: usize, seed: u64) -> Result<Graph> {
    GeneratorSpec {
        family: Family::DRegular,
        num_nodes: n,
        degree_param: d,
        prob: 0.0,
        seed,
    }
    .validate()?;
    let mut rng = rng_from_seed(seed);
    let mut adj: Vec<Vec<NodeId>> = vec![Vec::with_capacity(d); n];
    let mut points: Vec<NodeId> = Vec::with_capacity(n * d);
    for restart in 0..MAX_PAIRING_RESTARTS {
        for a in adj.iter_mut() {
            a.clear();
        }
        points.clear();
        points.extend((0..n).flat_map(|v| std::iter::repeat_n(v, d)));
        let mut ok = true;
        while let Some(a) = points.pop() {
            let j = rng.gen_range(0..points.len());
            let b = points.swap_remove(j);
            if a == b || adj[a].contains(&b) {
                ok = false;
                break;
            }
            adj[a].push(b);
            adj[b].push(a);
        }
        if ok {
            log::debug!("d-regular n={n} d={d} seed={seed}: {restart} restarts");
            let edges: Vec<_> = adj
                .iter()
                .enumerate()
                .flat_map(|(u, ns)| ns.iter().filter(move |&&v| u < v).map(move |&v| (u, v)))
                .collect();
            return Graph::new(n, &edges);
        }
    }
    Err(Error::Capability(format!(
        "pairing model did not produce a simple graph within {MAX_PAIRING_RESTARTS} restarts"
    )))
}

/// Watts-Strogatz small-world graph.
///
/// Starts from a ring where each node links to its `k/2` nearest neighbors on
/// each side; each lattice edge `(u, u+j)` is then rewired with probability
/// `p` to `(u, w)` for a uniform `w` that is neither `u` nor already adjacent.
/// Rewiring keeps the edge count fixed.
pub fn gen_small_world(n: usize, k: usize, p: f64, seed: u64) -> Result<Graph> {
    GeneratorSpec {
        family: Family::SmallWorld,
        num_nodes: n,
        degree_param: k,
        prob: p,
        seed,
    }
    .validate()?;
    let mut rng = rng_from_seed(seed);
    let mut adj: Vec<BTreeSet<NodeId>> = vec![BTreeSet::new(); n];
    for u in 0..n {
        for j in 1..=k / 2 {
            let v = (u + j) % n;
            adj[u].insert(v);
            adj[v].insert(u);
        }
    }
    for j in 1..=k / 2 {
        for u in 0..n {
            let v = (u + j) % n;
            if rng.gen::<f64>() >= p || adj[u].len() >= n - 1 {
                continue;
            }
            let w = loop {
                let w = rng.gen_range(0..n);
                if w != u && !adj[u].contains(&w) {
                    break w;
                }
            };
            adj[u].remove(&v);
            adj[v].remove(&u);
            adj[u].insert(w);
            adj[w].insert(u);
        }
    }
    let edges: Vec<_> = adj
        .iter()
        .enumerate()
        .flat_map(|(u, ns)| ns.iter().filter(move |&&v| u < v).map(move |&v| (u, v)))
        .collect();
    Graph::new(n, &edges)
}

/// Holme-Kim growth model: preferential attachment with triad formation.
///
/// Seeded with a clique on `m` nodes. Each new node adds `m` edges: the first
/// by preferential attachment; each further edge is, with probability
/// `p_triad`, closed onto a random neighbor of the last preferentially chosen
/// target (falling back to preferential attachment when none is available).
/// The result has `m(m-1)/2 + m(n-m)` edges.
pub fn gen_scale_free(n: usize, m: usize, p_triad: f64, seed: u64) -> Result<Graph> {
    GeneratorSpec {
        family: Family::ScaleFree,
        num_nodes: n,
        degree_param: m,
        prob: p_triad,
        seed,
    }
    .validate()?;
    let mut rng = rng_from_seed(seed);
    let mut adj: Vec<BTreeSet<NodeId>> = vec![BTreeSet::new(); n];
    // every node appears once per incident edge
    let mut repeated: Vec<NodeId> = Vec::new();
    for u in 0..m {
        for v in u + 1..m {
            adj[u].insert(v);
            adj[v].insert(u);
            repeated.push(u);
            repeated.push(v);
        }
    }
    for source in m..n {
        let mut chosen: Vec<NodeId> = Vec::with_capacity(m);
        let attach = |rng: &mut rand_chacha::ChaCha8Rng, chosen: &[NodeId]| loop {
            let t = if repeated.is_empty() {
                rng.gen_range(0..source)
            } else {
                repeated[rng.gen_range(0..repeated.len())]
            };
            if !chosen.contains(&t) {
                break t;
            }
        };
        let mut anchor = attach(&mut rng, &chosen);
        chosen.push(anchor);
        while chosen.len() < m {
            if rng.gen::<f64>() < p_triad {
                let options: Vec<NodeId> = adj[anchor]
                    .iter()
                    .copied()
                    .filter(|w| !chosen.contains(w))
                    .collect();
                if !options.is_empty() {
                    chosen.push(options[rng.gen_range(0..options.len())]);
                    continue;
                }
            }
            anchor = attach(&mut rng, &chosen);
            chosen.push(anchor);
        }
        for &t in &chosen {
            adj[source].insert(t);
            adj[t].insert(source);
            repeated.push(t);
            repeated.push(source);
        }
    }
    let edges: Vec<_> = adj
        .iter()
        .enumerate()
        .flat_map(|(u, ns)| ns.iter().filter(move |&&v| u < v).map(move |&v| (u, v)))
        .collect();
    Graph::new(n, &edges)
}

/// `count` graphs from `spec`; graph `i` uses seed `child_seed(seed, i)`.
pub fn gen_dataset(spec: &GeneratorSpec, count: usize, seed: u64) -> Result<Vec<Graph>> {
    gen_dataset_sweep(spec, &[spec.prob], count, seed)
}

/// Like [`gen_dataset`], but graph `i` uses probability `probs[i % probs.len()]`.
/// Sweeping the rewiring/triad probability spreads clustering coefficients
/// across the dataset.
pub fn gen_dataset_sweep(
    spec: &GeneratorSpec,
    probs: &[f64],
    count: usize,
    seed: u64,
) -> Result<Vec<Graph>> {
    if probs.is_empty() {
        return input("probability sweep is empty");
    }
    (0..count)
        .map(|i| {
            GeneratorSpec {
                prob: probs[i % probs.len()],
                seed: child_seed(seed, i as u64),
                ..*spec
            }
            .generate()
        })
        .collect()
}
