//! End-to-end loss and gradient for one labeled graph, per task wiring.
//!
//! | target | plain / id_fast                    | id_full                                   |
//! |--------|------------------------------------|-------------------------------------------|
//! | nodes  | one pass, linear head per node     | one ego pass per node, linear head        |
//! | pairs  | one pass, pair head on `[h_u,h_v]` | ego of `u` colored at `v`, linear head    |
//! | graph  | one pass, sum pool, linear head    | ego center embeddings, sum pool, head     |

use std::hash::Hasher;

use fnv::FnvHasher;
use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use super::forward::{
    backward, ego_features, forward_layers, head_linear, head_linear_backward, pair_scores,
    pair_scores_backward, prepare_input, Tape,
};
use super::loss::{argmax_row, xent_sum};
use super::model::{HeadKind, Model, ModelConfig, Variant};
use crate::error::{input, Error, Result};
use crate::graph::{EgoNet, Graph, NodeId};

/// How embeddings are turned into predictions; echoed in training reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Wiring {
    NodeEmbedding,
    EgoNodeEmbedding,
    PairConcat,
    Conditional,
    SumPool,
    EgoSumPool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Target {
    /// One label per node.
    Nodes(Vec<usize>),
    /// Ordered pairs `(u, v, label)`.
    Pairs(Vec<(NodeId, NodeId, usize)>),
    Graph(usize),
}

impl Target {
    pub fn count(&self) -> usize {
        match self {
            Target::Nodes(l) => l.len(),
            Target::Pairs(p) => p.len(),
            Target::Graph(_) => 1,
        }
    }

    pub fn labels(&self) -> Vec<usize> {
        match self {
            Target::Nodes(l) => l.clone(),
            Target::Pairs(p) => p.iter().map(|t| t.2).collect(),
            Target::Graph(l) => vec![*l],
        }
    }
}

pub fn wiring_for(config: &ModelConfig, target: &Target) -> Result<Wiring> {
    let linear = config.head == HeadKind::Linear;
    let full = config.variant == Variant::IdFull;
    match (target, full, linear) {
        (Target::Nodes(_), false, true) => Ok(Wiring::NodeEmbedding),
        (Target::Nodes(_), true, true) => Ok(Wiring::EgoNodeEmbedding),
        (Target::Graph(_), false, true) => Ok(Wiring::SumPool),
        (Target::Graph(_), true, true) => Ok(Wiring::EgoSumPool),
        (Target::Pairs(_), false, false) => Ok(Wiring::PairConcat),
        (Target::Pairs(_), true, true) => Ok(Wiring::Conditional),
        (Target::Pairs(_), false, true) => {
            input("pair tasks with plain or id_fast models need a pair head")
        }
        (Target::Pairs(_), true, false) => {
            input("pair tasks with id_full models use a linear head")
        }
        (_, _, false) => input("node and graph tasks use a linear head"),
    }
}

/// Node features used when a graph carries none: a single constant column.
pub fn default_features(g: &Graph) -> Array2<f64> {
    match g.node_features() {
        Some(x) => x.clone(),
        None => Array2::ones((g.num_nodes(), 1)),
    }
}

enum Units {
    Whole(Array2<f64>),
    /// One ego network per prediction unit, with its prepared local input.
    Egos(Vec<(EgoNet, Array2<f64>)>),
}

/// A labeled graph with the model-specific inputs precomputed.
pub struct PreparedSample {
    pub graph: Graph,
    pub target: Target,
    pub wiring: Wiring,
    units: Units,
}

pub fn prepare_sample(
    model: &Model,
    graph: Graph,
    x: &Array2<f64>,
    target: Target,
) -> Result<PreparedSample> {
    let wiring = wiring_for(&model.config, &target)?;
    let n = graph.num_nodes();
    match &target {
        Target::Nodes(l) if l.len() != n => return input("one node label per node required"),
        Target::Pairs(p) if p.iter().any(|&(u, v, _)| u >= n || v >= n) => {
            return input("pair endpoint outside graph")
        }
        _ => {}
    }
    let k = model.config.num_layers;
    let units = match wiring {
        Wiring::NodeEmbedding | Wiring::SumPool | Wiring::PairConcat => {
            if n == 0 {
                return input("empty graph");
            }
            Units::Whole(prepare_input(model, &graph, x)?)
        }
        Wiring::EgoNodeEmbedding | Wiring::EgoSumPool => {
            let mut egos = Vec::with_capacity(n);
            for v in 0..n {
                let ego = graph.extract_ego(v, k, None)?;
                let xl = prepare_input(model, &ego.subgraph, &ego_features(&ego, x))?;
                egos.push((ego, xl));
            }
            if egos.is_empty() {
                return input("empty graph");
            }
            Units::Egos(egos)
        }
        Wiring::Conditional => {
            let Target::Pairs(pairs) = &target else {
                unreachable!()
            };
            let mut egos = Vec::with_capacity(pairs.len());
            for &(u, v, _) in pairs {
                let ego = graph.extract_ego(u, k, Some(v))?;
                let xl = prepare_input(model, &ego.subgraph, &ego_features(&ego, x))?;
                egos.push((ego, xl));
            }
            Units::Egos(egos)
        }
    };
    Ok(PreparedSample {
        graph,
        target,
        wiring,
        units,
    })
}

#[derive(Debug, Clone)]
pub struct SampleResult {
    /// Summed cross-entropy over the sample's prediction units.
    pub loss_sum: f64,
    pub count: usize,
    pub correct: usize,
    pub logits: Array2<f64>,
    /// Digest of every discrete choice (ReLU masks, max winners) taken.
    pub pattern: u64,
}

fn finite(a: &Array2<f64>, what: &str) -> Result<()> {
    if a.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Numeric(format!("non-finite {what}")))
    }
}

fn hash_relu(h: &mut FnvHasher, a: &Array2<f64>) {
    for x in a.iter() {
        h.write_u8(u8::from(*x > 0.0));
    }
}

/// Runs one sample. With `grad = Some((buf, scale))` the gradient of
/// `scale * loss_sum` is added into `buf`.
pub fn run_sample(
    model: &Model,
    s: &PreparedSample,
    grad: Option<(&mut [f64], f64)>,
) -> Result<SampleResult> {
    if let Some((buf, _)) = &grad {
        if buf.len() != model.params.len() {
            return input("gradient buffer size differs from parameter count");
        }
    }
    let labels = s.target.labels();
    let mut hasher = FnvHasher::default();
    let g = &s.graph;
    let hd = model.config.hidden_dim;

    let (logits, d_fn): (
        Array2<f64>,
        Box<dyn FnOnce(&Array2<f64>, &mut [f64]) -> Result<()> + '_>,
    ) = match (&s.units, &s.target) {
        (Units::Whole(x), target) => {
            let (h, tape) = forward_layers(model, g, x.clone(), None)?;
            tape.hash_pattern(&mut hasher);
            match target {
                Target::Nodes(_) => {
                    let logits = head_linear(model, h.view())?;
                    (
                        logits,
                        Box::new(move |d: &Array2<f64>, buf: &mut [f64]| {
                            let dh = head_linear_backward(model, h.view(), d, buf);
                            backward(model, g, &tape, dh, buf).map(|_| ())
                        }),
                    )
                }
                Target::Graph(_) => {
                    let pooled = h.sum_axis(Axis(0)).insert_axis(Axis(0));
                    let logits = head_linear(model, pooled.view())?;
                    let n = g.num_nodes();
                    (
                        logits,
                        Box::new(move |d: &Array2<f64>, buf: &mut [f64]| {
                            let dp = head_linear_backward(model, pooled.view(), d, buf);
                            let dh = dp.broadcast((n, hd)).unwrap().to_owned();
                            backward(model, g, &tape, dh, buf).map(|_| ())
                        }),
                    )
                }
                Target::Pairs(p) => {
                    let pairs: Vec<(NodeId, NodeId)> = p.iter().map(|t| (t.0, t.1)).collect();
                    let scores = pair_scores(model, &h, &pairs)?;
                    hash_relu(&mut hasher, scores.hidden_pre());
                    let logits = scores.logits.clone();
                    let n = g.num_nodes();
                    (
                        logits,
                        Box::new(move |d: &Array2<f64>, buf: &mut [f64]| {
                            let dh = pair_scores_backward(model, &scores, &pairs, d, n, buf);
                            backward(model, g, &tape, dh, buf).map(|_| ())
                        }),
                    )
                }
            }
        }
        (Units::Egos(egos), target) => {
            let mut centers = Array2::zeros((egos.len(), hd));
            let mut tapes: Vec<Tape> = Vec::with_capacity(egos.len());
            for (i, (ego, xl)) in egos.iter().enumerate() {
                let (h, tape) = forward_layers(model, &ego.subgraph, xl.clone(), ego.identity)?;
                tape.hash_pattern(&mut hasher);
                centers.row_mut(i).assign(&h.row(ego.center));
                tapes.push(tape);
            }
            let pooled = matches!(target, Target::Graph(_));
            let head_in = if pooled {
                centers.sum_axis(Axis(0)).insert_axis(Axis(0))
            } else {
                centers
            };
            let logits = head_linear(model, head_in.view())?;
            (
                logits,
                Box::new(move |d: &Array2<f64>, buf: &mut [f64]| {
                    let dc = head_linear_backward(model, head_in.view(), d, buf);
                    for (i, ((ego, _), tape)) in egos.iter().zip(&tapes).enumerate() {
                        let row = if pooled { dc.row(0) } else { dc.row(i) };
                        let mut dh = Array2::zeros((ego.subgraph.num_nodes(), hd));
                        dh.row_mut(ego.center).assign(&row);
                        backward(model, &ego.subgraph, tape, dh, buf)?;
                    }
                    Ok(())
                }),
            )
        }
    };
    finite(&logits, "logits")?;
    let (loss_sum, d_logits) = xent_sum(&logits, &labels)?;
    if !loss_sum.is_finite() {
        return Err(Error::Numeric("non-finite loss".into()));
    }
    let correct = labels
        .iter()
        .enumerate()
        .filter(|&(i, &y)| argmax_row(logits.row(i)) == y)
        .count();
    if let Some((buf, scale)) = grad {
        d_fn(&(d_logits * scale), buf)?;
    }
    Ok(SampleResult {
        loss_sum,
        count: labels.len(),
        correct,
        logits,
        pattern: hasher.finish(),
    })
}
