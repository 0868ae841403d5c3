//! One message-passing layer: forward with cached intermediates, and the
//! matching reverse pass.
//!
//! Every flavor follows the same skeleton:
//!
//! 1. node pre-messages `pre = h W + b`, where the identity-colored node (if
//!    any) uses the second message function;
//! 2. messages `m = act(pre)` (ReLU for sage, identity otherwise); with edge
//!    features the message along each directed edge is
//!    `act(pre[s] + f_su E)`;
//! 3. neighbor aggregation and the flavor's update.
//!
//! The reverse pass routes max-aggregation gradients to the lowest-index
//! maximizer and treats ReLU as having slope 0 at 0.

use std::hash::Hasher;

use fnv::FnvHasher;
use ndarray::{s, Array1, Array2, ArrayView2, Axis};

use super::model::{Aggregation, Flavor, LayerParams, MessageParams, Model};
use crate::error::{input, Result};
use crate::graph::{Graph, NodeId};

const NO_ARG: usize = usize::MAX;

#[inline]
fn relu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

#[inline]
fn step(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        0.0
    }
}

/// Graph structure a layer runs on.
#[derive(Clone, Copy)]
pub struct GraphCtx<'a> {
    pub graph: &'a Graph,
    pub identity: Option<NodeId>,
}

#[derive(Debug, Clone)]
pub struct LayerCache {
    h_in: Array2<f64>,
    pre: Array2<f64>,
    msg: Array2<f64>,
    edge_pre: Option<Array2<f64>>,
    edge_msg: Option<Array2<f64>>,
    agg: Array2<f64>,
    /// Winning slot per `(node, coordinate)` for max aggregation.
    argmax: Vec<usize>,
    z: Array2<f64>,
    gin_y: Option<Array2<f64>>,
    relu_messages: bool,
    pub out: Array2<f64>,
}

fn gcn_coeff(g: &Graph, u: NodeId, s: NodeId) -> f64 {
    1.0 / (((g.degree(u) + 1) * (g.degree(s) + 1)) as f64).sqrt()
}

fn message_for<'p>(layer: &'p LayerParams, ctx: &GraphCtx, sender: NodeId) -> &'p MessageParams {
    if ctx.identity == Some(sender) {
        &layer.msg1
    } else {
        &layer.msg0
    }
}

fn edge_features<'a>(model: &Model, g: &'a Graph) -> Result<Option<&'a Array2<f64>>> {
    let dim = model.config.edge_dim;
    if dim == 0 {
        return Ok(None);
    }
    match g.edge_features() {
        Some(f) if f.ncols() == dim => Ok(Some(f)),
        Some(f) => input(format!(
            "model expects edge features of width {dim}, graph has {}",
            f.ncols()
        )),
        None if g.num_edges() == 0 => Ok(None),
        None => input("model expects edge features but the graph has none"),
    }
}

pub fn layer_forward(
    model: &Model,
    layer: &LayerParams,
    ctx: GraphCtx,
    h_in: Array2<f64>,
) -> Result<LayerCache> {
    let g = ctx.graph;
    let n = g.num_nodes();
    let dout = layer.out_dim;
    if h_in.nrows() != n || h_in.ncols() != layer.in_dim {
        return input(format!(
            "layer expects {} x {} input, got {} x {}",
            n,
            layer.in_dim,
            h_in.nrows(),
            h_in.ncols()
        ));
    }
    let p = &model.params;
    let flavor = model.config.flavor;
    let mut pre = h_in.dot(&p.view(layer.msg0.weight)) + &p.view(layer.msg0.bias);
    if let Some(i) = ctx.identity {
        if !layer.shares_messages() {
            let row = h_in.row(i).dot(&p.view(layer.msg1.weight)) + &p.view(layer.msg1.bias).row(0);
            pre.row_mut(i).assign(&row);
        }
    }
    let msg = match flavor {
        Flavor::Sage => pre.mapv(relu),
        _ => pre.clone(),
    };

    let (edge_pre, edge_msg) = match edge_features(model, g)? {
        None => (None, None),
        Some(ef) => {
            let mut epre = Array2::zeros((g.num_slots(), dout));
            for u in 0..n {
                for slot in g.slots(u) {
                    let s = g.slot_target(slot);
                    let e = message_for(layer, &ctx, s).edge_weight.unwrap();
                    let row = ef.row(g.slot_edge(slot)).dot(&p.view(e)) + &pre.row(s);
                    epre.row_mut(slot).assign(&row);
                }
            }
            let emsg = match flavor {
                Flavor::Sage => epre.mapv(relu),
                _ => epre.clone(),
            };
            (Some(epre), Some(emsg))
        }
    };
    let slot_msg = |slot: usize| match &edge_msg {
        Some(em) => em.row(slot),
        None => msg.row(g.slot_target(slot)),
    };

    let mut agg = Array2::zeros((n, dout));
    let mut argmax = Vec::new();
    match flavor {
        Flavor::Gcn => {
            for u in 0..n {
                let mut a = agg.row_mut(u);
                for slot in g.slots(u) {
                    let c = gcn_coeff(g, u, g.slot_target(slot));
                    a.scaled_add(c, &slot_msg(slot));
                }
                a.scaled_add(1.0 / (g.degree(u) + 1) as f64, &msg.row(u));
            }
        }
        Flavor::Sage | Flavor::Gin => match model.config.aggregation {
            Aggregation::Sum | Aggregation::Mean => {
                for u in 0..n {
                    let mut a = agg.row_mut(u);
                    for slot in g.slots(u) {
                        a += &slot_msg(slot);
                    }
                    if model.config.aggregation == Aggregation::Mean && g.degree(u) > 0 {
                        a /= g.degree(u) as f64;
                    }
                }
            }
            Aggregation::Max => {
                argmax = vec![NO_ARG; n * dout];
                for u in 0..n {
                    for slot in g.slots(u) {
                        let m = slot_msg(slot);
                        for j in 0..dout {
                            let k = u * dout + j;
                            // strict comparison keeps the lowest-index maximizer
                            if argmax[k] == NO_ARG || m[j] > agg[[u, j]] {
                                agg[[u, j]] = m[j];
                                argmax[k] = slot;
                            }
                        }
                    }
                }
            }
        },
    }

    let (z, gin_y, out) = match flavor {
        Flavor::Gcn => {
            let out = agg.mapv(relu);
            (agg.clone(), None, out)
        }
        Flavor::Sage => {
            let u = p.view(layer.update_weight.unwrap());
            let z = agg.dot(&u.slice(s![..dout, ..]))
                + h_in.dot(&u.slice(s![dout.., ..]))
                + &p.view(layer.update_bias.unwrap());
            let out = z.mapv(relu);
            (z, None, out)
        }
        Flavor::Gin => {
            let eps = p.view(layer.eps.unwrap())[[0, 0]];
            let z = &msg * (1.0 + eps) + &agg;
            let y = z.mapv(relu).dot(&p.view(layer.update_weight.unwrap()))
                + &p.view(layer.update_bias.unwrap());
            let out = y.mapv(relu);
            (z, Some(y), out)
        }
    };
    Ok(LayerCache {
        h_in,
        pre,
        msg,
        edge_pre,
        edge_msg,
        agg,
        argmax,
        z,
        gin_y,
        relu_messages: flavor == Flavor::Sage,
        out,
    })
}

fn add_into(grad: &mut [f64], id: crate::nn::params::TensorId, value: ArrayView2<f64>) {
    let mut g = id.view_mut(grad);
    g += &value;
}

fn colsum(a: &Array2<f64>) -> Array2<f64> {
    a.sum_axis(Axis(0)).insert_axis(Axis(0))
}

fn outer(a: ndarray::ArrayView1<f64>, b: ndarray::ArrayView1<f64>) -> Array2<f64> {
    let a2 = a.insert_axis(Axis(1));
    let b2 = b.insert_axis(Axis(0));
    a2.dot(&b2)
}

/// Reverse pass for one layer. Accumulates parameter gradients into `grad`
/// and returns the gradient with respect to the layer input.
pub fn layer_backward(
    model: &Model,
    layer: &LayerParams,
    ctx: GraphCtx,
    cache: &LayerCache,
    d_out: &Array2<f64>,
    grad: &mut [f64],
) -> Result<Array2<f64>> {
    let g = ctx.graph;
    let n = g.num_nodes();
    let dout = layer.out_dim;
    if d_out.dim() != cache.out.dim() {
        return input("upstream gradient shape differs from layer output");
    }
    let p = &model.params;
    let flavor = model.config.flavor;

    let mut d_msg = Array2::<f64>::zeros((n, dout));
    let mut dh_self: Option<Array2<f64>> = None;
    // gradient w.r.t. the neighbor aggregate (sage/gin) or the normalized sum (gcn)
    let d_agg: Array2<f64> = match flavor {
        Flavor::Gcn => d_out * &cache.z.mapv(step),
        Flavor::Sage => {
            let dz = d_out * &cache.z.mapv(step);
            let uid = layer.update_weight.unwrap();
            let u = p.view(uid);
            {
                let mut gu = uid.view_mut(grad);
                let mut top = gu.slice_mut(s![..dout, ..]);
                top += &cache.agg.t().dot(&dz);
                let mut bottom = gu.slice_mut(s![dout.., ..]);
                bottom += &cache.h_in.t().dot(&dz);
            }
            add_into(grad, layer.update_bias.unwrap(), colsum(&dz).view());
            dh_self = Some(dz.dot(&u.slice(s![dout.., ..]).t()));
            dz.dot(&u.slice(s![..dout, ..]).t())
        }
        Flavor::Gin => {
            let y = cache.gin_y.as_ref().unwrap();
            let dy = d_out * &y.mapv(step);
            let r = cache.z.mapv(relu);
            add_into(grad, layer.update_weight.unwrap(), r.t().dot(&dy).view());
            add_into(grad, layer.update_bias.unwrap(), colsum(&dy).view());
            let dr = dy.dot(&p.view(layer.update_weight.unwrap()).t());
            let dz = dr * &cache.z.mapv(step);
            let eid = layer.eps.unwrap();
            let eps = p.view(eid)[[0, 0]];
            grad[eid.offset] += (&dz * &cache.msg).sum();
            d_msg.scaled_add(1.0 + eps, &dz);
            dz
        }
    };

    let mut d_edge_msg = cache
        .edge_msg
        .as_ref()
        .map(|em| Array2::<f64>::zeros(em.raw_dim()));
    {
        let mut route =
            |slot: usize, j: Option<usize>, coef: f64, row: ndarray::ArrayView1<f64>| {
                let target = match d_edge_msg.as_mut() {
                    Some(dem) => dem.row_mut(slot),
                    None => d_msg.row_mut(g.slot_target(slot)),
                };
                let mut target = target;
                match j {
                    Some(j) => target[j] += coef * row[j],
                    None => target.scaled_add(coef, &row),
                }
            };
        match flavor {
            Flavor::Gcn => {
                for u in 0..n {
                    for slot in g.slots(u) {
                        route(
                            slot,
                            None,
                            gcn_coeff(g, u, g.slot_target(slot)),
                            d_agg.row(u),
                        );
                    }
                }
            }
            _ => match model.config.aggregation {
                Aggregation::Sum | Aggregation::Mean => {
                    for u in 0..n {
                        let coef =
                            if model.config.aggregation == Aggregation::Mean && g.degree(u) > 0 {
                                1.0 / g.degree(u) as f64
                            } else {
                                1.0
                            };
                        for slot in g.slots(u) {
                            route(slot, None, coef, d_agg.row(u));
                        }
                    }
                }
                Aggregation::Max => {
                    for u in 0..n {
                        for j in 0..dout {
                            let slot = cache.argmax[u * dout + j];
                            if slot != NO_ARG {
                                route(slot, Some(j), 1.0, d_agg.row(u));
                            }
                        }
                    }
                }
            },
        }
    }
    if flavor == Flavor::Gcn {
        for u in 0..n {
            let c = 1.0 / (g.degree(u) + 1) as f64;
            let row = d_agg.row(u).to_owned();
            d_msg.row_mut(u).scaled_add(c, &row);
        }
    }

    let act_grad = |pre: &Array2<f64>, d: Array2<f64>| match flavor {
        Flavor::Sage => d * &pre.mapv(step),
        _ => d,
    };
    let mut d_pre = act_grad(&cache.pre, d_msg);
    if let (Some(dem), Some(epre)) = (d_edge_msg, cache.edge_pre.as_ref()) {
        let d_epre = act_grad(epre, dem);
        let ef = g.edge_features().unwrap();
        for u in 0..n {
            for slot in g.slots(u) {
                let s = g.slot_target(slot);
                let e = message_for(layer, &ctx, s).edge_weight.unwrap();
                let row = d_epre.row(slot);
                let mut dp = d_pre.row_mut(s);
                dp += &row;
                let mut ge = e.view_mut(grad);
                ge += &outer(ef.row(g.slot_edge(slot)), row);
            }
        }
    }

    let split_identity = ctx.identity.filter(|_| !layer.shares_messages());
    let d_pre_id: Option<Array1<f64>> = split_identity.map(|i| {
        let r = d_pre.row(i).to_owned();
        d_pre.row_mut(i).fill(0.0);
        r
    });
    add_into(grad, layer.msg0.weight, cache.h_in.t().dot(&d_pre).view());
    add_into(grad, layer.msg0.bias, colsum(&d_pre).view());
    let mut dh = d_pre.dot(&p.view(layer.msg0.weight).t());
    if let (Some(i), Some(r)) = (split_identity, d_pre_id) {
        add_into(
            grad,
            layer.msg1.weight,
            outer(cache.h_in.row(i), r.view()).view(),
        );
        add_into(grad, layer.msg1.bias, r.view().insert_axis(Axis(0)));
        let back = p.view(layer.msg1.weight).dot(&r);
        let mut row = dh.row_mut(i);
        row += &back;
    }
    if let Some(ds) = dh_self {
        dh += &ds;
    }
    Ok(dh)
}

impl LayerCache {
    /// Mixes the layer's discrete choices (ReLU on/off, max winners) into
    /// `h`. Two evaluations with the same pattern lie on the same smooth
    /// piece of the network function.
    pub fn hash_pattern(&self, h: &mut FnvHasher) {
        let mut bits = |a: &Array2<f64>| {
            for x in a.iter() {
                h.write_u8(u8::from(*x > 0.0));
            }
        };
        if self.relu_messages {
            bits(&self.pre);
            if let Some(e) = &self.edge_pre {
                bits(e);
            }
        }
        bits(&self.z);
        if let Some(y) = &self.gin_y {
            bits(y);
        }
        for &a in &self.argmax {
            h.write_u64(a as u64);
        }
    }
}
