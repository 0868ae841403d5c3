//! Random regular graph differentiation and the plain-GNN blindness
//! certificate.
//!
//! All nodes of a d-regular graph look alike to 1-WL, and therefore to any
//! plain message-passing network fed constant features. Closed walk counts of
//! length up to K do separate many such graphs; [`run_regular_experiment`]
//! measures how many.

use std::collections::{BTreeSet, HashMap};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::analytic::graph_signature;
use crate::error::{input, Error, Result};
use crate::generators::gen_d_regular;
use crate::graph::Graph;
use crate::nn::{node_embeddings, Model};
use crate::rng::{child_seed, GENERATOR_NAME};
use crate::wl::{are_isomorphic, wl_graph_hash, HASH_NAME};

/// Walk length of the signature used to prefilter isomorphism checks.
const PREFILTER_K: usize = 8;

/// Candidate graphs drawn per requested graph before giving up.
pub const REGEN_BUDGET_FACTOR: usize = 50;

/// Absolute tolerance of [`certify_gnn_blindness`].
pub const BLINDNESS_TOL: f64 = 1e-9;

pub const SIGNATURE_NAME: &str = "sorted multiset of per-node closed walk counts, lengths 1..=K";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSettings {
    pub n: usize,
    pub d: usize,
    pub graph_count: usize,
    pub k_list: Vec<usize>,
    pub seed: u64,
    pub rng: String,
    pub wl_hash: String,
    pub signature: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KFraction {
    pub k: usize,
    pub distinct_signatures: usize,
    /// `distinct_signatures / graph_count`.
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub settings: ExperimentSettings,
    pub fractions: Vec<KFraction>,
    /// Share of graphs whose WL hash no other graph in the pool has.
    pub wl_distinguished_fraction: f64,
    pub wl_distinct_hashes: usize,
    pub wl_all_equal: bool,
    /// Candidates discarded because they were isomorphic to an earlier graph.
    pub num_regen_for_nonisomorphism: usize,
    /// Left empty unless the caller fills it in, so reruns are identical.
    pub timestamp: Option<String>,
}

impl ExperimentReport {
    pub fn fraction_at(&self, k: usize) -> Option<f64> {
        self.fractions.iter().find(|f| f.k == k).map(|f| f.fraction)
    }
}

/// Draws `count` pairwise non-isomorphic random d-regular graphs.
///
/// Candidate `i` uses seed `child_seed(seed, i)`. Returns the pool and the
/// number of rejected candidates.
pub fn nonisomorphic_regular_pool(
    n: usize,
    d: usize,
    count: usize,
    seed: u64,
) -> Result<(Vec<Graph>, usize)> {
    let budget = REGEN_BUDGET_FACTOR * count + 100;
    let mut pool: Vec<Graph> = Vec::with_capacity(count);
    let mut by_sig: HashMap<Vec<u8>, Vec<usize>> = HashMap::new();
    let mut rejected = 0;
    let mut attempt = 0u64;
    while pool.len() < count {
        if attempt as usize >= budget {
            return Err(Error::Capability(format!(
                "only {} non-isomorphic {d}-regular graphs on {n} nodes found in {budget} draws",
                pool.len()
            )));
        }
        let g = gen_d_regular(n, d, child_seed(seed, attempt))?;
        attempt += 1;
        let sig = graph_signature(&g, PREFILTER_K)?;
        let same = by_sig.entry(sig).or_default();
        let mut duplicate = false;
        for &j in same.iter() {
            if are_isomorphic(&g, &pool[j])? {
                duplicate = true;
                break;
            }
        }
        if duplicate {
            rejected += 1;
            continue;
        }
        same.push(pool.len());
        pool.push(g);
    }
    Ok((pool, rejected))
}

/// Fraction of graphs told apart by closed-walk signatures, per K, for a pool
/// of non-isomorphic random d-regular graphs, next to the 1-WL baseline.
pub fn run_regular_experiment(
    n: usize,
    d: usize,
    graph_count: usize,
    k_list: &[usize],
    seed: u64,
) -> Result<ExperimentReport> {
    if graph_count == 0 {
        return input("graph_count must be positive");
    }
    if k_list.is_empty() || k_list.contains(&0) {
        return input("k_list must be nonempty with every K >= 1");
    }
    let (pool, rejected) = nonisomorphic_regular_pool(n, d, graph_count, seed)?;
    let mut fractions = Vec::with_capacity(k_list.len());
    for &k in k_list {
        let mut sigs = BTreeSet::new();
        for g in &pool {
            sigs.insert(graph_signature(g, k)?);
        }
        fractions.push(KFraction {
            k,
            distinct_signatures: sigs.len(),
            fraction: sigs.len() as f64 / graph_count as f64,
        });
    }
    let hashes: Vec<u64> = pool.iter().map(wl_graph_hash).collect();
    let mut freq: HashMap<u64, usize> = HashMap::new();
    for &h in &hashes {
        *freq.entry(h).or_default() += 1;
    }
    let unique = hashes.iter().filter(|h| freq[h] == 1).count();
    let distinguished = if graph_count == 1 { 0 } else { unique };
    log::info!("regular pool n={n} d={d}: {rejected} isomorphic candidates rejected");
    Ok(ExperimentReport {
        settings: ExperimentSettings {
            n,
            d,
            graph_count,
            k_list: k_list.to_vec(),
            seed,
            rng: GENERATOR_NAME.into(),
            wl_hash: HASH_NAME.into(),
            signature: SIGNATURE_NAME.into(),
        },
        fractions,
        wl_distinguished_fraction: distinguished as f64 / graph_count as f64,
        wl_distinct_hashes: freq.len(),
        wl_all_equal: freq.len() == 1,
        num_regen_for_nonisomorphism: rejected,
        timestamp: None,
    })
}

/// CSV with one row per report: `n,d,K=..,K=..,wl`. Fractions use two
/// decimals; a K missing from a report leaves its cell empty.
pub fn render_csv(reports: &[ExperimentReport]) -> String {
    let ks: BTreeSet<usize> = reports
        .iter()
        .flat_map(|r| r.settings.k_list.iter().copied())
        .collect();
    let mut out = String::from("n,d");
    for k in &ks {
        out.push_str(&format!(",K={k}"));
    }
    out.push_str(",1-WL\n");
    for r in reports {
        out.push_str(&format!("{},{}", r.settings.n, r.settings.d));
        for &k in &ks {
            match r.fraction_at(k) {
                Some(f) => out.push_str(&format!(",{f:.2}")),
                None => out.push(','),
            }
        }
        out.push_str(&format!(",{:.2}\n", r.wl_distinguished_fraction));
    }
    out
}

/// True iff every node embedding of `model` on the d-regular graph `g` with
/// all-ones features agrees with every other within [`BLINDNESS_TOL`].
pub fn certify_gnn_blindness(g: &Graph, model: &Model) -> Result<bool> {
    if g.regular_degree().is_none() {
        return input("blindness certificate needs a regular graph");
    }
    let x = Array2::ones((g.num_nodes(), model.config.input_dim));
    let h = node_embeddings(model, g, &x)?;
    let first = h.row(0);
    Ok(h.rows().into_iter().all(|r| {
        r.iter()
            .zip(first.iter())
            .all(|(a, b)| (a - b).abs() <= BLINDNESS_TOL)
    }))
}
