//! Trainable message passing.

pub mod adam;
pub mod checkpoint;
pub mod forward;
pub mod layers;
pub mod loss;
pub mod model;
pub mod params;
pub mod pipeline;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use checkpoint::{read_checkpoint, write_checkpoint};
pub use forward::{
    backward, closed_walk_features, edge_pair_score, ego_features, forward_conditional,
    forward_id_full, forward_layers, forward_plain, head_linear, node_embeddings, prepare_input,
    readout_graph, Tape,
};
pub use loss::{argmax_row, loss_xent};
pub use model::{
    init_model, match_budget, Aggregation, Flavor, HeadKind, Model, ModelConfig, Variant,
};
