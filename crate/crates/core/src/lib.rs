//! Identity-aware graph neural networks.
//!
//! The crate is split along the lines of the pipeline it supports:
//!
//! - [`graph`]: immutable undirected graphs, BFS and K-hop ego networks with
//!   identity coloring.
//! - [`generators`]: seeded random d-regular, small-world and scale-free graphs.
//! - [`wl`]: 1-WL color refinement, WL hashing and an exact isomorphism test.
//! - [`analytic`]: parameter-free constructions (walk counts, closed-walk
//!   features, clustering coefficients, reachability, graph signatures).
//! - [`expressiveness`]: the random regular graph differentiation experiment
//!   and the plain-GNN blindness certificate.
//! - [`nn`]: a small message-passing engine with plain, identity-aware
//!   (full) and cycle-feature (fast) variants, reverse-mode gradients and Adam.
//! - [`tasks`]: synthetic supervised tasks, splits, training and evaluation.
//!
//! Throughout, "walk" means a walk in the graph-theoretic sense: vertices may
//! repeat. The counts produced by adjacency powers and by the identity-aware
//! message passing construction are walk counts, not simple path counts.

pub mod analytic;
pub mod dataset;
pub mod error;
pub mod expressiveness;
pub mod generators;
pub mod graph;
pub mod nn;
pub mod rng;
pub mod tasks;
pub mod wl;

pub use error::{Error, Result};
pub use graph::{EgoNet, Graph, NodeId};
