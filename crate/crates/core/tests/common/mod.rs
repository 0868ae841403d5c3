//! Independent oracles and random inputs shared by the integration tests.
#![allow(dead_code)]

use idgnn_core::generators::{gen_d_regular, gen_scale_free, gen_small_world};
use idgnn_core::Graph;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ 0x5eed)
}

pub fn gnp(n: usize, p: f64, seed: u64) -> Graph {
    let mut r = rng(seed);
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if r.gen_bool(p) {
                edges.push((u, v));
            }
        }
    }
    Graph::new(n, &edges).unwrap()
}

/// Random graph from one of the three generator families (plus G(n, p) for
/// disconnected inputs), chosen by `seed`, with at most `max_n` nodes.
pub fn mixed_graph(seed: u64, max_n: usize) -> Graph {
    let mut r = rng(seed);
    let n = r.gen_range(6..=max_n);
    match seed % 4 {
        0 => gen_small_world(n, 4, r.gen_range(0.0..0.5), seed).unwrap(),
        1 => gen_scale_free(n, r.gen_range(1..=3), r.gen_range(0.0..1.0), seed).unwrap(),
        2 => {
            let d = r.gen_range(2..=4);
            let n = if n * d % 2 == 1 { n + 1 } else { n };
            gen_d_regular(n, d, seed).unwrap()
        }
        _ => gnp(n, r.gen_range(0.05..0.3), seed),
    }
}

pub fn random_perm(n: usize, seed: u64) -> Vec<usize> {
    use rand::seq::SliceRandom;
    let mut p: Vec<usize> = (0..n).collect();
    p.shuffle(&mut rng(seed));
    p
}

pub fn dense_adj(g: &Graph) -> Vec<Vec<u128>> {
    let n = g.num_nodes();
    let mut a = vec![vec![0u128; n]; n];
    for &(u, v) in g.edges() {
        a[u][v] = 1;
        a[v][u] = 1;
    }
    a
}

pub fn mat_mul(a: &[Vec<u128>], b: &[Vec<u128>]) -> Vec<Vec<u128>> {
    let n = a.len();
    let mut c = vec![vec![0u128; n]; n];
    for i in 0..n {
        for k in 0..n {
            if a[i][k] == 0 {
                continue;
            }
            for j in 0..n {
                c[i][j] += a[i][k] * b[k][j];
            }
        }
    }
    c
}

/// `A^1 .. A^k` by repeated dense multiplication.
pub fn dense_powers(g: &Graph, k: usize) -> Vec<Vec<Vec<u128>>> {
    let a = dense_adj(g);
    let mut out = vec![a.clone()];
    for _ in 1..k {
        let next = mat_mul(out.last().unwrap(), &a);
        out.push(next);
    }
    out
}

/// Number of walks of exactly `len` steps from `u` to `v`, by enumeration.
pub fn brute_walks(g: &Graph, u: usize, v: usize, len: usize) -> u64 {
    if len == 0 {
        return u64::from(u == v);
    }
    g.neighbors(u)
        .iter()
        .map(|&w| brute_walks(g, w, v, len - 1))
        .sum()
}

pub fn floyd_warshall(g: &Graph) -> Vec<Vec<Option<usize>>> {
    let n = g.num_nodes();
    let inf = usize::MAX / 4;
    let mut d = vec![vec![inf; n]; n];
    for (i, row) in d.iter_mut().enumerate() {
        row[i] = 0;
    }
    for &(u, v) in g.edges() {
        d[u][v] = 1;
        d[v][u] = 1;
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if d[i][k] + d[k][j] < d[i][j] {
                    d[i][j] = d[i][k] + d[k][j];
                }
            }
        }
    }
    d.into_iter()
        .map(|r| r.into_iter().map(|x| (x < inf).then_some(x)).collect())
        .collect()
}

/// Arbitrary edge lists, including duplicates and self-loops.
pub fn arb_graph(max_n: usize) -> impl Strategy<Value = Graph> {
    (1..=max_n).prop_flat_map(|n| {
        prop::collection::vec((0..n, 0..n), 0..=3 * n).prop_map(move |e| Graph::new(n, &e).unwrap())
    })
}

use idgnn_core::nn::pipeline::{prepare_sample, run_sample, PreparedSample, Target};
use idgnn_core::nn::{init_model, Aggregation, Flavor, HeadKind, Model, ModelConfig, Variant};
use ndarray::Array2;

pub const FLAVORS: [Flavor; 3] = [Flavor::Gcn, Flavor::Sage, Flavor::Gin];
pub const VARIANTS: [Variant; 3] = [Variant::Plain, Variant::IdFull, Variant::IdFast];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TargetKind {
    Nodes,
    Pairs,
    Graph,
}

pub const TARGETS: [TargetKind; 3] = [TargetKind::Nodes, TargetKind::Pairs, TargetKind::Graph];

pub fn random_matrix(rows: usize, cols: usize, seed: u64) -> Array2<f64> {
    let mut r = rng(seed);
    Array2::from_shape_fn((rows, cols), |_| r.gen_range(-1.0..1.0))
}

/// A small random model and labeled graph for gradient checks.
pub fn fd_case(
    flavor: Flavor,
    variant: Variant,
    target: TargetKind,
    aggregation: Aggregation,
    edge_dim: usize,
    seed: u64,
) -> (Model, PreparedSample) {
    let mut r = rng(seed);
    let n = r.gen_range(5..=8);
    let mut g = gnp(n, 0.4, seed);
    if edge_dim > 0 {
        let map = g
            .edges()
            .iter()
            .map(|&e| (e, (0..edge_dim).map(|_| r.gen_range(-1.0..1.0)).collect()))
            .collect();
        g = g.with_edge_features(&map).unwrap();
    }
    let classes = 3;
    let mut c = ModelConfig::new(flavor, variant, 2, classes);
    c.num_layers = 2;
    c.hidden_dim = 4;
    c.fast_k = 3;
    c.edge_dim = edge_dim;
    c.aggregation = aggregation;
    c.seed = seed;
    let target = match target {
        TargetKind::Nodes => Target::Nodes((0..n).map(|_| r.gen_range(0..classes)).collect()),
        TargetKind::Graph => Target::Graph(r.gen_range(0..classes)),
        TargetKind::Pairs => {
            if variant != Variant::IdFull {
                c.head = HeadKind::PairMlp { hidden: 3 };
            }
            Target::Pairs(
                (0..4)
                    .map(|_| {
                        (
                            r.gen_range(0..n),
                            r.gen_range(0..n),
                            r.gen_range(0..classes),
                        )
                    })
                    .collect(),
            )
        }
    };
    let mut model = init_model(c).unwrap();
    // gin's eps starts at 0; move it off so its gradient path is exercised
    for l in model.layers.clone() {
        if let Some(e) = l.eps {
            model.params.data[e.offset] = r.gen_range(-0.5..0.5);
        }
    }
    let x = random_matrix(n, 2, seed + 1);
    let sample = prepare_sample(&model, g, &x, target).unwrap();
    (model, sample)
}

#[derive(Debug, Default)]
pub struct FdStats {
    pub checked: usize,
    pub skipped_ties: usize,
    pub max_rel_err: f64,
    pub worst: String,
}

pub const FD_STEP: f64 = 1e-5;
/// Gradients smaller than this are compared absolutely.
pub const FD_FLOOR: f64 = 1e-6;

/// Central differences of the mean loss against the analytic gradient, for
/// every parameter coordinate. Coordinates whose perturbation flips any ReLU
/// or max choice are skipped.
pub fn fd_check(model: &mut Model, sample: &PreparedSample) -> FdStats {
    let scale = 1.0 / sample.target.count() as f64;
    let mut grad = vec![0.0; model.params.len()];
    let base = run_sample(model, sample, Some((&mut grad, scale))).unwrap();
    let mut st = FdStats::default();
    for i in 0..model.params.len() {
        let orig = model.params.data[i];
        model.params.data[i] = orig + FD_STEP;
        let plus = run_sample(model, sample, None).unwrap();
        model.params.data[i] = orig - FD_STEP;
        let minus = run_sample(model, sample, None).unwrap();
        model.params.data[i] = orig;
        if plus.pattern != base.pattern || minus.pattern != base.pattern {
            st.skipped_ties += 1;
            continue;
        }
        let num = (plus.loss_sum - minus.loss_sum) * scale / (2.0 * FD_STEP);
        let err = (num - grad[i]).abs() / num.abs().max(grad[i].abs()).max(FD_FLOOR);
        st.checked += 1;
        if err > st.max_rel_err {
            st.max_rel_err = err;
            st.worst = format!(
                "{} [{i}]: analytic {:.3e} numeric {:.3e}",
                model.params.name_of(i).unwrap_or("?"),
                grad[i],
                num
            );
        }
    }
    st
}
