//! Synthetic supervised tasks, splits, training and evaluation.
//!
//! - `node_cc`: 10-way node classification of the clustering coefficient,
//!   uniform bins on `[0, 1]`.
//! - `edge_spd`: 5-way classification of ordered node pairs by shortest path
//!   distance `1, 2, 3, 4, >=5` (unreachable pairs fall in the last class).
//! - `graph_cc`: 10-way classification of the mean clustering coefficient,
//!   uniform bins on `[0, 0.5]`, values above clamped to the top bin.

use std::time::Instant;

use ndarray::Array2;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::analytic::clustering_direct;
use crate::error::{input, Error, Result};
use crate::graph::{Graph, NodeId};
use crate::nn::adam::{adam_step, AdamConfig, AdamState};
use crate::nn::pipeline::{
    default_features, prepare_sample, run_sample, wiring_for, PreparedSample, Target, Wiring,
};
use crate::nn::Model;
use crate::rng::{child_seed, rng_from_seed};

pub const SPD_CLASSES: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    NodeCc,
    EdgeSpd,
    GraphCc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairSampling {
    pub pairs_per_graph: usize,
    /// Distances at or above this share the last class.
    pub distance_cap: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub kind: TaskKind,
    pub num_classes: usize,
    /// `num_classes + 1` increasing edges; empty for `edge_spd`.
    pub bin_edges: Vec<f64>,
    pub pair_sampling: Option<PairSampling>,
}

/// `num + 1` uniform edges `hi * i / num`.
fn uniform_edges(num: usize, denom: f64) -> Vec<f64> {
    (0..=num).map(|i| i as f64 / denom).collect()
}

impl TaskSpec {
    pub fn node_cc() -> Self {
        Self {
            kind: TaskKind::NodeCc,
            num_classes: 10,
            bin_edges: uniform_edges(10, 10.0),
            pair_sampling: None,
        }
    }

    pub fn graph_cc() -> Self {
        Self {
            kind: TaskKind::GraphCc,
            num_classes: 10,
            bin_edges: uniform_edges(10, 20.0),
            pair_sampling: None,
        }
    }

    pub fn edge_spd(pairs_per_graph: usize, seed: u64) -> Self {
        Self {
            kind: TaskKind::EdgeSpd,
            num_classes: SPD_CLASSES,
            bin_edges: Vec::new(),
            pair_sampling: Some(PairSampling {
                pairs_per_graph,
                distance_cap: SPD_CLASSES,
                seed,
            }),
        }
    }

    /// Bin of `x`: the last edge not above `x`, clamped to the class range.
    pub fn bin(&self, x: f64) -> usize {
        let above = self.bin_edges[1..].iter().take_while(|&&e| e <= x).count();
        above.min(self.num_classes - 1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledGraph {
    pub graph: Graph,
    pub target: Target,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskData {
    pub spec: TaskSpec,
    pub items: Vec<LabeledGraph>,
}

pub fn make_node_cc_task(graphs: &[Graph]) -> Result<TaskData> {
    let spec = TaskSpec::node_cc();
    let mut items = Vec::with_capacity(graphs.len());
    for g in graphs {
        let labels = (0..g.num_nodes())
            .map(|v| clustering_direct(g, v).map(|c| spec.bin(c)))
            .collect::<Result<Vec<_>>>()?;
        items.push(LabeledGraph {
            graph: g.clone(),
            target: Target::Nodes(labels),
        });
    }
    Ok(TaskData { spec, items })
}

pub fn mean_clustering(g: &Graph) -> Result<f64> {
    if g.num_nodes() == 0 {
        return Ok(0.0);
    }
    let mut sum = 0.0;
    for v in 0..g.num_nodes() {
        sum += clustering_direct(g, v)?;
    }
    Ok(sum / g.num_nodes() as f64)
}

pub fn make_graph_cc_task(graphs: &[Graph]) -> Result<TaskData> {
    let spec = TaskSpec::graph_cc();
    let mut items = Vec::with_capacity(graphs.len());
    for g in graphs {
        items.push(LabeledGraph {
            graph: g.clone(),
            target: Target::Graph(spec.bin(mean_clustering(g)?)),
        });
    }
    Ok(TaskData { spec, items })
}

/// SPD class of a pair at distance `dist` (`None` = unreachable).
pub fn spd_label(dist: Option<usize>) -> usize {
    match dist {
        Some(d) if d >= 1 => d.min(SPD_CLASSES) - 1,
        _ => SPD_CLASSES - 1,
    }
}

/// Stratified SPD pairs: each graph gets `pairs_per_graph / 5` pairs per
/// class (the remainder to the lowest classes), drawn without replacement
/// from the unordered pairs of that class, each in a random orientation.
/// Graph `i` uses the stream `child_seed(seed, i)`.
pub fn make_spd_task(graphs: &[Graph], pairs_per_graph: usize, seed: u64) -> Result<TaskData> {
    let spec = TaskSpec::edge_spd(pairs_per_graph, seed);
    let mut items = Vec::with_capacity(graphs.len());
    for (i, g) in graphs.iter().enumerate() {
        let n = g.num_nodes();
        let mut rng = rng_from_seed(child_seed(seed, i as u64));
        let mut buckets: Vec<Vec<(NodeId, NodeId)>> = vec![Vec::new(); SPD_CLASSES];
        for u in 0..n {
            let dist = g.bfs_distances(u, n)?;
            for v in u + 1..n {
                buckets[spd_label(dist[v])].push((u, v));
            }
        }
        let mut pairs = Vec::with_capacity(pairs_per_graph);
        for (class, bucket) in buckets.iter_mut().enumerate() {
            let quota =
                pairs_per_graph / SPD_CLASSES + usize::from(class < pairs_per_graph % SPD_CLASSES);
            if bucket.len() < quota {
                log::warn!(
                    "graph {i}: class {class} has {} of {quota} requested pairs",
                    bucket.len()
                );
            }
            bucket.shuffle(&mut rng);
            for &(u, v) in bucket.iter().take(quota) {
                let (a, b) = if rand::Rng::gen_bool(&mut rng, 0.5) {
                    (u, v)
                } else {
                    (v, u)
                };
                pairs.push((a, b, class));
            }
        }
        items.push(LabeledGraph {
            graph: g.clone(),
            target: Target::Pairs(pairs),
        });
    }
    Ok(TaskData { spec, items })
}

/// Shuffled graph-level split: `round(fraction * len)` indices for training,
/// the rest for validation.
pub fn split(len: usize, fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return input(format!("split fraction {fraction} outside (0, 1)"));
    }
    let mut idx: Vec<usize> = (0..len).collect();
    idx.shuffle(&mut rng_from_seed(seed));
    let n_train = (fraction * len as f64).round() as usize;
    if n_train == 0 || n_train == len {
        return input(format!(
            "split of {len} graphs at {fraction} leaves one side empty"
        ));
    }
    let val = idx.split_off(n_train);
    Ok((idx, val))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub seed: u64,
    /// Graphs per Adam step; 0 means full batch.
    pub batch_size: usize,
    pub train_fraction: f64,
    /// Put the elapsed time in the report (makes reports differ run to run).
    #[serde(default)]
    pub record_wall_clock: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            lr: 0.01,
            seed: 0,
            batch_size: 8,
            train_fraction: 0.8,
            record_wall_clock: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub model: crate::nn::ModelConfig,
    pub task: TaskSpec,
    pub train: TrainConfig,
    pub wiring: Wiring,
    pub param_count: usize,
    pub num_train_graphs: usize,
    pub num_val_graphs: usize,
    /// Mean training loss per prediction unit, one entry per epoch.
    pub epoch_losses: Vec<f64>,
    pub train_accuracy: f64,
    pub val_accuracy: f64,
    pub seed: u64,
    /// Only filled in on request, so reports stay reproducible.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_clock_secs: Option<f64>,
}

impl TrainReport {
    pub const CSV_HEADER: &'static str = "model,flavor,variant,task,seed,accuracy";

    pub fn csv_row(&self, model_name: &str) -> String {
        format!(
            "{model_name},{},{},{},{},{:.4}",
            serde_name(&self.model.flavor),
            serde_name(&self.model.variant),
            serde_name(&self.task.kind),
            self.seed,
            self.val_accuracy
        )
    }
}

/// serde name of a unit enum variant.
/// The serde string form of a unit enum variant, or "" for anything else.
pub fn serde_name<T: Serialize>(v: &T) -> String {
    serde_json::to_value(v)
        .ok()
        .and_then(|v| v.as_str().map(str::to_owned))
        .unwrap_or_default()
}

fn features_of(g: &Graph, model: &Model) -> Result<Array2<f64>> {
    let x = default_features(g);
    if x.ncols() != model.config.input_dim {
        return input(format!(
            "graph features have width {}, model expects {}",
            x.ncols(),
            model.config.input_dim
        ));
    }
    Ok(x)
}

pub fn prepare_items(model: &Model, items: &[&LabeledGraph]) -> Result<Vec<PreparedSample>> {
    items
        .iter()
        .map(|it| {
            prepare_sample(
                model,
                it.graph.clone(),
                &features_of(&it.graph, model)?,
                it.target.clone(),
            )
        })
        .collect()
}

fn accuracy(model: &Model, samples: &[PreparedSample]) -> Result<f64> {
    let (mut correct, mut count) = (0, 0);
    for s in samples {
        let r = run_sample(model, s, None)?;
        correct += r.correct;
        count += r.count;
    }
    if count == 0 {
        return input("evaluation over no labeled units");
    }
    Ok(correct as f64 / count as f64)
}

/// Argmax accuracy over every prediction unit of `items`.
pub fn evaluate(model: &Model, items: &[&LabeledGraph]) -> Result<f64> {
    if items.is_empty() {
        return input("evaluation over an empty split");
    }
    accuracy(model, &prepare_items(model, items)?)
}

/// Trains `model` in place with Adam on a seeded 80/20-style split.
///
/// Each epoch visits the training graphs in an order shuffled by
/// `child_seed(seed, epoch)`, taking one Adam step per batch of graphs on the
/// mean loss over the batch's prediction units.
pub fn train(model: &mut Model, task: &TaskData, cfg: &TrainConfig) -> Result<TrainReport> {
    if model.config.output_dim != task.spec.num_classes {
        return input(format!(
            "model has {} outputs, task has {} classes",
            model.config.output_dim, task.spec.num_classes
        ));
    }
    if !(cfg.lr > 0.0 && cfg.lr.is_finite()) {
        return input("learning rate must be positive");
    }
    let first = task
        .items
        .first()
        .ok_or_else(|| Error::Input("task has no graphs".into()))?;
    let wiring = wiring_for(&model.config, &first.target)?;
    let (tr_idx, va_idx) = split(task.items.len(), cfg.train_fraction, cfg.seed)?;
    let pick = |idx: &[usize]| idx.iter().map(|&i| &task.items[i]).collect::<Vec<_>>();
    let train_set = prepare_items(model, &pick(&tr_idx))?;
    let val_set = prepare_items(model, &pick(&va_idx))?;

    let start = Instant::now();
    let adam = AdamConfig {
        lr: cfg.lr,
        ..AdamConfig::default()
    };
    let mut state = AdamState::new(model.params.len());
    let mut grad = vec![0.0; model.params.len()];
    let batch = if cfg.batch_size == 0 {
        train_set.len()
    } else {
        cfg.batch_size
    };
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let mut order: Vec<usize> = (0..train_set.len()).collect();
        order.shuffle(&mut rng_from_seed(child_seed(cfg.seed, epoch as u64)));
        let (mut loss, mut units) = (0.0, 0usize);
        for chunk in order.chunks(batch) {
            let count: usize = chunk.iter().map(|&i| train_set[i].target.count()).sum();
            if count == 0 {
                continue;
            }
            grad.iter_mut().for_each(|g| *g = 0.0);
            for &i in chunk {
                let r = run_sample(model, &train_set[i], Some((&mut grad, 1.0 / count as f64)))?;
                loss += r.loss_sum;
            }
            units += count;
            adam_step(&mut model.params.data, &grad, &mut state, &adam)?;
        }
        let mean = loss / units.max(1) as f64;
        if !mean.is_finite() {
            return Err(Error::Numeric(format!(
                "training loss became non-finite in epoch {epoch}"
            )));
        }
        log::debug!("epoch {epoch}: loss {mean:.5}");
        epoch_losses.push(mean);
    }
    let elapsed = start.elapsed().as_secs_f64();
    Ok(TrainReport {
        model: model.config,
        task: task.spec.clone(),
        train: *cfg,
        wiring,
        param_count: model.param_count(),
        num_train_graphs: tr_idx.len(),
        num_val_graphs: va_idx.len(),
        epoch_losses,
        train_accuracy: accuracy(model, &train_set)?,
        val_accuracy: accuracy(model, &val_set)?,
        seed: cfg.seed,
        wall_clock_secs: cfg.record_wall_clock.then_some(elapsed),
    })
}
