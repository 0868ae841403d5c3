//! Model configuration, parameter layout and initialization.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::params::{ParamStore, TensorId};
use crate::error::{input, Result};
use crate::rng::rng_from_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Flavor {
    /// Symmetric-normalized aggregation over neighbors plus a self loop.
    Gcn,
    /// `ReLU(W h + b)` messages, neighbor aggregation, then
    /// `U [agg, h_self] + c`.
    Sage,
    /// `(1 + eps) m_self + agg` followed by a two-layer perceptron.
    Gin,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// One message function; the identity mark is ignored.
    Plain,
    /// Separate message functions for the identity-colored node, applied on
    /// ego networks.
    IdFull,
    /// Plain message passing over features augmented with closed walk counts.
    IdFast,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    Sum,
    Mean,
    Max,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum HeadKind {
    /// One linear map from the embedding to class logits.
    Linear,
    /// Concatenated pair of embeddings through `Linear -> ReLU -> Linear`.
    PairMlp { hidden: usize },
}

/// Default length of the closed-walk feature vector for the fast variant.
pub const DEFAULT_FAST_K: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub flavor: Flavor,
    pub variant: Variant,
    pub num_layers: usize,
    pub hidden_dim: usize,
    pub input_dim: usize,
    pub output_dim: usize,
    /// Neighbor aggregation for sage and gin. gcn always uses its normalized
    /// sum.
    pub aggregation: Aggregation,
    /// Closed-walk feature length for [`Variant::IdFast`].
    pub fast_k: usize,
    /// Per-edge feature length concatenated into message inputs; 0 disables.
    #[serde(default)]
    pub edge_dim: usize,
    pub head: HeadKind,
    pub seed: u64,
}

impl ModelConfig {
    pub fn new(flavor: Flavor, variant: Variant, input_dim: usize, output_dim: usize) -> Self {
        Self {
            flavor,
            variant,
            num_layers: 3,
            hidden_dim: 32,
            input_dim,
            output_dim,
            aggregation: match flavor {
                Flavor::Sage => Aggregation::Max,
                _ => Aggregation::Sum,
            },
            fast_k: DEFAULT_FAST_K,
            edge_dim: 0,
            head: HeadKind::Linear,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_layers == 0 {
            return input("num_layers must be at least 1");
        }
        if self.hidden_dim == 0 || self.input_dim == 0 || self.output_dim == 0 {
            return input("hidden_dim, input_dim and output_dim must be positive");
        }
        if self.variant == Variant::IdFast && self.fast_k == 0 {
            return input("id_fast needs fast_k >= 1");
        }
        if let HeadKind::PairMlp { hidden: 0 } = self.head {
            return input("pair head hidden width must be positive");
        }
        Ok(())
    }

    /// Width of the first layer's input, after any feature augmentation.
    pub fn layer_input_dim(&self) -> usize {
        match self.variant {
            Variant::IdFast => self.input_dim + self.fast_k,
            _ => self.input_dim,
        }
    }
}

/// Message function parameters: `h W + b`, plus `f E` for edge features.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MessageParams {
    pub weight: TensorId,
    pub bias: TensorId,
    pub edge_weight: Option<TensorId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerParams {
    pub in_dim: usize,
    pub out_dim: usize,
    pub msg0: MessageParams,
    /// Equal to `msg0` (same storage) unless the model is identity-aware.
    pub msg1: MessageParams,
    /// sage: `(out + in) x out`; gin: `out x out`; absent for gcn.
    pub update_weight: Option<TensorId>,
    pub update_bias: Option<TensorId>,
    /// gin only, `1 x 1`.
    pub eps: Option<TensorId>,
}

impl LayerParams {
    pub fn shares_messages(&self) -> bool {
        self.msg0 == self.msg1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HeadParams {
    pub w1: TensorId,
    pub b1: TensorId,
    /// Second layer of the pair perceptron.
    pub w2: Option<TensorId>,
    pub b2: Option<TensorId>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub config: ModelConfig,
    pub params: ParamStore,
    pub layers: Vec<LayerParams>,
    pub head: HeadParams,
}

fn alloc_message(
    store: &mut ParamStore,
    tag: &str,
    din: usize,
    dout: usize,
    edim: usize,
) -> MessageParams {
    MessageParams {
        weight: store.alloc(format!("{tag}.weight"), din, dout),
        bias: store.alloc(format!("{tag}.bias"), 1, dout),
        edge_weight: (edim > 0).then(|| store.alloc(format!("{tag}.edge_weight"), edim, dout)),
    }
}

impl Model {
    /// Allocates the parameter layout for `config` with all values zero.
    pub fn zeros(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let mut store = ParamStore::default();
        let mut layers = Vec::with_capacity(config.num_layers);
        let h = config.hidden_dim;
        for l in 0..config.num_layers {
            let din = if l == 0 { config.layer_input_dim() } else { h };
            let msg0 = alloc_message(
                &mut store,
                &format!("layer{l}.msg0"),
                din,
                h,
                config.edge_dim,
            );
            let msg1 = if config.variant == Variant::IdFull {
                alloc_message(
                    &mut store,
                    &format!("layer{l}.msg1"),
                    din,
                    h,
                    config.edge_dim,
                )
            } else {
                msg0
            };
            let (update_weight, update_bias, eps) = match config.flavor {
                Flavor::Gcn => (None, None, None),
                Flavor::Sage => (
                    Some(store.alloc(format!("layer{l}.update.weight"), h + din, h)),
                    Some(store.alloc(format!("layer{l}.update.bias"), 1, h)),
                    None,
                ),
                Flavor::Gin => (
                    Some(store.alloc(format!("layer{l}.update.weight"), h, h)),
                    Some(store.alloc(format!("layer{l}.update.bias"), 1, h)),
                    Some(store.alloc(format!("layer{l}.eps"), 1, 1)),
                ),
            };
            layers.push(LayerParams {
                in_dim: din,
                out_dim: h,
                msg0,
                msg1,
                update_weight,
                update_bias,
                eps,
            });
        }
        let head = match config.head {
            HeadKind::Linear => HeadParams {
                w1: store.alloc("head.weight", h, config.output_dim),
                b1: store.alloc("head.bias", 1, config.output_dim),
                w2: None,
                b2: None,
            },
            HeadKind::PairMlp { hidden } => HeadParams {
                w1: store.alloc("head.0.weight", 2 * h, hidden),
                b1: store.alloc("head.0.bias", 1, hidden),
                w2: Some(store.alloc("head.1.weight", hidden, config.output_dim)),
                b2: Some(store.alloc("head.1.bias", 1, config.output_dim)),
            },
        };
        Ok(Self {
            config,
            params: store,
            layers,
            head,
        })
    }

    /// Number of trainable scalars (shared message tensors counted once).
    pub fn param_count(&self) -> usize {
        self.params.len()
    }
}

/// Initializes a model from its config seed.
///
/// Every weight and bias of a linear map with fan-in `f` is drawn from
/// `U(-1/sqrt(f), 1/sqrt(f))`, tensors in allocation order; gin's eps starts
/// at 0. Identity-aware models draw their second message function
/// independently.
pub fn init_model(config: ModelConfig) -> Result<Model> {
    let mut model = Model::zeros(config)?;
    let mut rng = rng_from_seed(config.seed);
    let fan_in: Vec<(TensorId, usize)> = {
        let mut v = Vec::new();
        for layer in &model.layers {
            let msg = |m: &MessageParams, v: &mut Vec<(TensorId, usize)>| {
                let f = layer.in_dim + m.edge_weight.map_or(0, |e| e.rows);
                v.push((m.weight, f));
                v.push((m.bias, f));
                if let Some(e) = m.edge_weight {
                    v.push((e, f));
                }
            };
            msg(&layer.msg0, &mut v);
            if !layer.shares_messages() {
                msg(&layer.msg1, &mut v);
            }
            if let (Some(w), Some(b)) = (layer.update_weight, layer.update_bias) {
                v.push((w, w.rows));
                v.push((b, w.rows));
            }
        }
        let hd = model.head;
        v.push((hd.w1, hd.w1.rows));
        v.push((hd.b1, hd.w1.rows));
        if let (Some(w2), Some(b2)) = (hd.w2, hd.b2) {
            v.push((w2, w2.rows));
            v.push((b2, w2.rows));
        }
        v
    };
    for (id, f) in fan_in {
        let bound = 1.0 / (f.max(1) as f64).sqrt();
        for x in &mut model.params.data[id.range()] {
            *x = rng.gen_range(-bound..bound);
        }
    }
    Ok(model)
}

/// Largest hidden width (at most `start`) whose model has no more parameters
/// than `budget`. Returns `None` when even width 1 exceeds the budget.
pub fn match_budget(config: ModelConfig, budget: usize, start: usize) -> Result<Option<usize>> {
    for h in (1..=start).rev() {
        let m = Model::zeros(ModelConfig {
            hidden_dim: h,
            ..config
        })?;
        if m.param_count() <= budget {
            return Ok(Some(h));
        }
    }
    Ok(None)
}

impl Model {
    /// Loads the walk-counting weight assignment into a sage/sum identity-aware
    /// model with `hidden_dim == num_layers == K` and scalar input.
    ///
    /// Layer 1: both message weights zero, `b0 = 0`, `b1 = e_0`. Layers
    /// `2..=K`: `W0 = W1` shift slot `i` to slot `i + 1`, `b0 = 0`,
    /// `b1 = e_0`. The update passes the aggregated message through
    /// unchanged. With all-ones input, the center embedding of an ego network
    /// is the closed walk count vector of the center.
    pub fn load_walk_counting_weights(&mut self) -> Result<()> {
        let c = self.config;
        if c.flavor != Flavor::Sage
            || c.variant != Variant::IdFull
            || c.aggregation != Aggregation::Sum
            || c.hidden_dim != c.num_layers
            || c.input_dim != 1
            || c.edge_dim != 0
        {
            return input(
                "walk-counting weights need sage/id_full/sum with hidden_dim == num_layers and input_dim 1",
            );
        }
        let k = c.hidden_dim;
        self.params.data.iter_mut().for_each(|x| *x = 0.0);
        for (l, layer) in self.layers.clone().iter().enumerate() {
            if l > 0 {
                for w in [layer.msg0.weight, layer.msg1.weight] {
                    let mut w = self.params.view_mut(w);
                    for j in 1..k {
                        w[[j - 1, j]] = 1.0;
                    }
                }
            }
            self.params.view_mut(layer.msg1.bias)[[0, 0]] = 1.0;
            let mut u = self.params.view_mut(layer.update_weight.unwrap());
            for j in 0..k {
                u[[j, j]] = 1.0;
            }
        }
        Ok(())
    }

    /// Copies every message-0 tensor into message-1, making the identity mark
    /// irrelevant.
    pub fn tie_identity_messages(&mut self) {
        for layer in self.layers.clone() {
            if layer.shares_messages() {
                continue;
            }
            let pairs = [
                (Some(layer.msg0.weight), Some(layer.msg1.weight)),
                (Some(layer.msg0.bias), Some(layer.msg1.bias)),
                (layer.msg0.edge_weight, layer.msg1.edge_weight),
            ];
            for (src, dst) in pairs {
                if let (Some(s), Some(d)) = (src, dst) {
                    let vals = self.params.data[s.range()].to_vec();
                    self.params.data[d.range()].copy_from_slice(&vals);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn init_is_deterministic() {
        let c = ModelConfig::new(Flavor::Gin, Variant::IdFull, 3, 4);
        assert_eq!(init_model(c).unwrap(), init_model(c).unwrap());
        let other = init_model(ModelConfig { seed: 1, ..c }).unwrap();
        assert_ne!(init_model(c).unwrap().params.data, other.params.data);
    }

    #[test]
    fn plain_models_share_message_storage() {
        let m = init_model(ModelConfig::new(Flavor::Sage, Variant::Plain, 1, 2)).unwrap();
        assert!(m.layers.iter().all(LayerParams::shares_messages));
        let full = init_model(ModelConfig::new(Flavor::Sage, Variant::IdFull, 1, 2)).unwrap();
        assert!(full.layers.iter().all(|l| !l.shares_messages()));
        assert!(full.param_count() > m.param_count());
    }

    #[test]
    fn zero_hidden_is_rejected() {
        let c = ModelConfig {
            hidden_dim: 0,
            ..ModelConfig::new(Flavor::Gcn, Variant::Plain, 1, 2)
        };
        assert!(init_model(c).is_err());
        let c = ModelConfig {
            fast_k: 0,
            ..ModelConfig::new(Flavor::Gcn, Variant::IdFast, 1, 2)
        };
        assert!(init_model(c).is_err());
    }

    #[test]
    fn fast_variant_widens_first_layer() {
        let m = Model::zeros(ModelConfig::new(Flavor::Gcn, Variant::IdFast, 2, 3)).unwrap();
        assert_eq!(m.layers[0].in_dim, 2 + DEFAULT_FAST_K);
        assert_eq!(m.layers[1].in_dim, 32);
    }

    #[test]
    fn budget_matching_shrinks_identity_models() {
        let plain = ModelConfig::new(Flavor::Gcn, Variant::Plain, 1, 10);
        let budget = Model::zeros(plain).unwrap().param_count();
        let full = ModelConfig {
            variant: Variant::IdFull,
            ..plain
        };
        let h = match_budget(full, budget, 32).unwrap().unwrap();
        assert!(h < 32);
        let m = Model::zeros(ModelConfig {
            hidden_dim: h,
            ..full
        })
        .unwrap();
        assert!(m.param_count() <= budget);
    }
}
