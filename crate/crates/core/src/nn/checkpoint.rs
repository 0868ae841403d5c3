//! Model checkpoints.
//!
//! Byte layout:
//!
//! | offset          | size         | content                                  |
//! |-----------------|--------------|------------------------------------------|
//! | 0               | 8            | magic `IDGNNCK1`                         |
//! | 8               | 8            | header length `L`, u64 little-endian     |
//! | 16              | `L`          | UTF-8 JSON header                        |
//! | 16 + `L`        | 8 * `N`      | `N` parameters, f64 little-endian        |
//!
//! The header is `{"config": .., "num_params": N, "tensors": [{"name",
//! "offset", "rows", "cols"}, ..]}`; tensor offsets count f64 values from the
//! start of the parameter blob, row-major.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::model::{Model, ModelConfig};
use super::params::TensorEntry;
use crate::error::{input, Result};

pub const MAGIC: &[u8; 8] = b"IDGNNCK1";

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    config: ModelConfig,
    num_params: usize,
    tensors: Vec<TensorEntry>,
}

pub fn write_checkpoint(model: &Model, mut w: impl Write) -> Result<()> {
    let header = serde_json::to_vec(&Header {
        config: model.config,
        num_params: model.params.len(),
        tensors: model.params.index.clone(),
    })?;
    w.write_all(MAGIC)?;
    w.write_all(&(header.len() as u64).to_le_bytes())?;
    w.write_all(&header)?;
    let mut blob = Vec::with_capacity(8 * model.params.len());
    for x in &model.params.data {
        blob.extend_from_slice(&x.to_le_bytes());
    }
    w.write_all(&blob)?;
    Ok(())
}

pub fn read_checkpoint(mut r: impl Read) -> Result<Model> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return input("not a model checkpoint (bad magic)");
    }
    let mut len = [0u8; 8];
    r.read_exact(&mut len)?;
    let len = u64::from_le_bytes(len) as usize;
    let mut header = vec![0u8; len];
    r.read_exact(&mut header)?;
    let header: Header = serde_json::from_slice(&header)?;
    let mut model = Model::zeros(header.config)?;
    if model.params.index != header.tensors || model.params.len() != header.num_params {
        return input("checkpoint tensor table does not match its config");
    }
    let mut blob = vec![0u8; 8 * header.num_params];
    r.read_exact(&mut blob)?;
    for (x, chunk) in model.params.data.iter_mut().zip(blob.chunks_exact(8)) {
        *x = f64::from_le_bytes(chunk.try_into().unwrap());
    }
    Ok(model)
}
