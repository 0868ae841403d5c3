//! Whole-model passes: layer stacks, identity-aware ego passes, readouts and
//! prediction heads, each with its reverse pass.

use fnv::FnvHasher;
use ndarray::{concatenate, s, Array1, Array2, ArrayView1, ArrayView2, Axis};

use super::layers::{layer_backward, layer_forward, GraphCtx, LayerCache};
use super::model::{HeadKind, Model, Variant};
use crate::analytic::walk_count_features;
use crate::error::{input, Error, Result};
use crate::graph::{EgoNet, Graph, NodeId};

/// Cached intermediates of one pass over one graph.
#[derive(Debug, Clone)]
pub struct Tape {
    layers: Vec<LayerCache>,
    identity: Option<NodeId>,
    num_nodes: usize,
}

impl Tape {
    pub fn hash_pattern(&self, h: &mut FnvHasher) {
        for l in &self.layers {
            l.hash_pattern(h);
        }
    }
}

/// Closed-walk counts of length `1..=k` per node, scaled as `ln(1 + c)`.
///
/// Raw counts grow like `degree^k`; the log keeps the augmented columns on
/// the same scale as ordinary features while remaining injective.
pub fn closed_walk_features(g: &Graph, k: usize) -> Result<Array2<f64>> {
    let counts = walk_count_features(g, k)?;
    let mut out = Array2::zeros((g.num_nodes(), k));
    for (v, row) in counts.iter().enumerate() {
        for (j, &c) in row.iter().enumerate() {
            out[[v, j]] = (c as f64).ln_1p();
        }
    }
    Ok(out)
}

/// Input to the first layer: `x` itself, or `[x, closed-walk features]` for
/// the fast variant.
pub fn prepare_input(model: &Model, g: &Graph, x: &Array2<f64>) -> Result<Array2<f64>> {
    let c = &model.config;
    if x.nrows() != g.num_nodes() || x.ncols() != c.input_dim {
        return input(format!(
            "features must be {} x {}, got {} x {}",
            g.num_nodes(),
            c.input_dim,
            x.nrows(),
            x.ncols()
        ));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return input("features must be finite");
    }
    match c.variant {
        Variant::IdFast => {
            let extra = closed_walk_features(g, c.fast_k)?;
            Ok(concatenate![Axis(1), x.view(), extra.view()])
        }
        _ => Ok(x.clone()),
    }
}

/// Runs every layer on `g`. `x` must already be prepared (see
/// [`prepare_input`]). `identity` selects the node whose outgoing messages use
/// the second message function.
pub fn forward_layers(
    model: &Model,
    g: &Graph,
    x: Array2<f64>,
    identity: Option<NodeId>,
) -> Result<(Array2<f64>, Tape)> {
    if let Some(i) = identity {
        if i >= g.num_nodes() {
            return input("identity node outside graph");
        }
    }
    let ctx = GraphCtx { graph: g, identity };
    let mut h = x;
    let mut caches = Vec::with_capacity(model.layers.len());
    for layer in &model.layers {
        let cache = layer_forward(model, layer, ctx, h)?;
        h = cache.out.clone();
        caches.push(cache);
    }
    if h.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite node embedding".into()));
    }
    Ok((
        h,
        Tape {
            layers: caches,
            identity,
            num_nodes: g.num_nodes(),
        },
    ))
}

/// Reverse pass through the layer stack. Returns the gradient with respect
/// to the prepared input.
pub fn backward(
    model: &Model,
    g: &Graph,
    tape: &Tape,
    d_out: Array2<f64>,
    grad: &mut [f64],
) -> Result<Array2<f64>> {
    if tape.layers.len() != model.layers.len() || tape.num_nodes != g.num_nodes() {
        return input("tape was recorded for a different model or graph");
    }
    if grad.len() != model.params.len() {
        return input("gradient buffer size differs from parameter count");
    }
    let ctx = GraphCtx {
        graph: g,
        identity: tape.identity,
    };
    let mut d = d_out;
    for (layer, cache) in model.layers.iter().zip(&tape.layers).rev() {
        d = layer_backward(model, layer, ctx, cache, &d, grad)?;
    }
    Ok(d)
}

/// Node embeddings of a plain pass (the identity mark is never used).
pub fn forward_plain(model: &Model, g: &Graph, x: &Array2<f64>) -> Result<Array2<f64>> {
    let prepared = prepare_input(model, g, x)?;
    Ok(forward_layers(model, g, prepared, None)?.0)
}

/// Identity-aware pass on an ego network; returns only the center embedding.
pub fn forward_id_full(model: &Model, ego: &EgoNet, x_local: &Array2<f64>) -> Result<Array1<f64>> {
    if model.config.variant != Variant::IdFull {
        return input("forward_id_full needs an id_full model");
    }
    let prepared = prepare_input(model, &ego.subgraph, x_local)?;
    let (h, _) = forward_layers(model, &ego.subgraph, prepared, ego.identity)?;
    Ok(h.row(ego.center).to_owned())
}

/// Rows of `x` for the ego's nodes, in local order.
pub fn ego_features(ego: &EgoNet, x: &Array2<f64>) -> Array2<f64> {
    x.select(Axis(0), &ego.to_parent)
}

/// Conditional embedding of `u` with identity coloring at `v`, computed on
/// `u`'s K-hop ego network.
pub fn forward_conditional(
    model: &Model,
    g: &Graph,
    x: &Array2<f64>,
    u: NodeId,
    v: NodeId,
) -> Result<Array1<f64>> {
    if model.config.variant != Variant::IdFull {
        return input("conditional embeddings need an id_full model");
    }
    let ego = g.extract_ego(u, model.config.num_layers, Some(v))?;
    forward_id_full(model, &ego, &ego_features(&ego, x))
}

/// Per-node embeddings for any variant. Identity-aware models embed each node
/// on its own ego network.
pub fn node_embeddings(model: &Model, g: &Graph, x: &Array2<f64>) -> Result<Array2<f64>> {
    match model.config.variant {
        Variant::IdFull => {
            let mut out = Array2::zeros((g.num_nodes(), model.config.hidden_dim));
            for v in 0..g.num_nodes() {
                let ego = g.extract_ego(v, model.config.num_layers, None)?;
                out.row_mut(v)
                    .assign(&forward_id_full(model, &ego, &ego_features(&ego, x))?);
            }
            Ok(out)
        }
        _ => forward_plain(model, g, x),
    }
}

/// Column-wise sum of node embeddings.
pub fn readout_graph(embeddings: &Array2<f64>) -> Result<Array1<f64>> {
    if embeddings.nrows() == 0 {
        return input("readout of an empty graph");
    }
    Ok(embeddings.sum_axis(Axis(0)))
}

/// Linear head: `logits = h W + b` per row.
pub fn head_linear(model: &Model, h: ArrayView2<f64>) -> Result<Array2<f64>> {
    let hd = model.head;
    if model.config.head != HeadKind::Linear {
        return input("model has a pair head, not a linear head");
    }
    if h.ncols() != hd.w1.rows {
        return input("embedding width differs from head input");
    }
    Ok(h.dot(&model.params.view(hd.w1)) + &model.params.view(hd.b1))
}

pub fn head_linear_backward(
    model: &Model,
    h: ArrayView2<f64>,
    d_logits: &Array2<f64>,
    grad: &mut [f64],
) -> Array2<f64> {
    let hd = model.head;
    {
        let mut gw = hd.w1.view_mut(grad);
        gw += &h.t().dot(d_logits);
    }
    {
        let mut gb = hd.b1.view_mut(grad);
        gb += &d_logits.sum_axis(Axis(0)).insert_axis(Axis(0));
    }
    d_logits.dot(&model.params.view(hd.w1).t())
}

struct PairCache {
    input: Array2<f64>,
    hidden_pre: Array2<f64>,
}

fn pair_forward(model: &Model, pairs: ArrayView2<f64>) -> Result<(Array2<f64>, PairCache)> {
    let hd = model.head;
    let (Some(w2), Some(b2)) = (hd.w2, hd.b2) else {
        return input("model has a linear head, not a pair head");
    };
    if pairs.ncols() != hd.w1.rows {
        return input("pair embedding width differs from head input");
    }
    let p = &model.params;
    let hidden_pre = pairs.dot(&p.view(hd.w1)) + &p.view(hd.b1);
    let logits = hidden_pre.mapv(|x| x.max(0.0)).dot(&p.view(w2)) + &p.view(b2);
    Ok((
        logits,
        PairCache {
            input: pairs.to_owned(),
            hidden_pre,
        },
    ))
}

fn pair_backward(
    model: &Model,
    cache: &PairCache,
    d_logits: &Array2<f64>,
    grad: &mut [f64],
) -> Array2<f64> {
    let hd = model.head;
    let (w2, b2) = (hd.w2.unwrap(), hd.b2.unwrap());
    let p = &model.params;
    let r = cache.hidden_pre.mapv(|x| x.max(0.0));
    {
        let mut g = w2.view_mut(grad);
        g += &r.t().dot(d_logits);
    }
    {
        let mut g = b2.view_mut(grad);
        g += &d_logits.sum_axis(Axis(0)).insert_axis(Axis(0));
    }
    let dr = d_logits.dot(&p.view(w2).t());
    let dpre = dr * &cache.hidden_pre.mapv(|x| if x > 0.0 { 1.0 } else { 0.0 });
    {
        let mut g = hd.w1.view_mut(grad);
        g += &cache.input.t().dot(&dpre);
    }
    {
        let mut g = hd.b1.view_mut(grad);
        g += &dpre.sum_axis(Axis(0)).insert_axis(Axis(0));
    }
    dpre.dot(&p.view(hd.w1).t())
}

/// Logits for an ordered pair: `[h_u, h_v]` through the two-layer pair head.
/// Swapping `u` and `v` generally changes the result.
pub fn edge_pair_score(
    model: &Model,
    h_u: ArrayView1<f64>,
    h_v: ArrayView1<f64>,
) -> Result<Array1<f64>> {
    if h_u.len() != h_v.len() {
        return input("pair embeddings differ in width");
    }
    let row = concatenate![Axis(0), h_u, h_v].insert_axis(Axis(0));
    Ok(pair_forward(model, row.view())?.0.row(0).to_owned())
}

/// Batched pair scoring with a reverse pass, used by training.
pub(crate) struct PairScores {
    cache: PairCache,
    pub logits: Array2<f64>,
}

impl PairScores {
    pub fn hidden_pre(&self) -> &Array2<f64> {
        &self.cache.hidden_pre
    }
}

pub(crate) fn pair_scores(
    model: &Model,
    h: &Array2<f64>,
    pairs: &[(NodeId, NodeId)],
) -> Result<PairScores> {
    let d = h.ncols();
    let mut input = Array2::zeros((pairs.len(), 2 * d));
    for (i, &(u, v)) in pairs.iter().enumerate() {
        input.slice_mut(s![i, ..d]).assign(&h.row(u));
        input.slice_mut(s![i, d..]).assign(&h.row(v));
    }
    let (logits, cache) = pair_forward(model, input.view())?;
    Ok(PairScores { cache, logits })
}

/// Returns the gradient with respect to `h` (same shape).
pub(crate) fn pair_scores_backward(
    model: &Model,
    scores: &PairScores,
    pairs: &[(NodeId, NodeId)],
    d_logits: &Array2<f64>,
    num_nodes: usize,
    grad: &mut [f64],
) -> Array2<f64> {
    let d_in = pair_backward(model, &scores.cache, d_logits, grad);
    let d = d_in.ncols() / 2;
    let mut dh = Array2::zeros((num_nodes, d));
    for (i, &(u, v)) in pairs.iter().enumerate() {
        let mut ru = dh.row_mut(u);
        ru += &d_in.slice(s![i, ..d]);
        let mut rv = dh.row_mut(v);
        rv += &d_in.slice(s![i, d..]);
    }
    dh
}
