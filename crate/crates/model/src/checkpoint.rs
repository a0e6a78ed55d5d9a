//! Checkpoint files: one JSON header line, then raw little-endian `f32`
//! tensors in layout order.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::params::{ModelConfig, Params};
use crate::ModelError;

pub const MAGIC: &str = "UICLIP-TOY";
pub const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub magic: String,
    pub version: u32,
    pub d_model: usize,
    pub embed_dim: usize,
    pub layers: usize,
    pub heads: usize,
    pub vocab: usize,
    pub tau: f32,
    pub image_size: usize,
    pub patch: usize,
    pub max_tokens: usize,
    /// Tensor names and shapes, in blob order.
    pub tensors: Vec<(String, usize, usize)>,
}

fn header_for(params: &Params<f32>) -> CheckpointHeader {
    let c = params.config;
    CheckpointHeader {
        magic: MAGIC.into(),
        version: VERSION,
        d_model: c.d_model,
        embed_dim: c.embed_dim,
        layers: c.layers,
        heads: c.heads,
        vocab: c.vocab,
        tau: params.tau(),
        image_size: c.image_size,
        patch: c.patch,
        max_tokens: c.max_tokens,
        tensors: params
            .specs
            .iter()
            .map(|s| (s.name.clone(), s.rows, s.cols))
            .collect(),
    }
}

/// Serializes to bytes.
pub fn to_bytes(params: &Params<f32>) -> Vec<u8> {
    let mut out = serde_json::to_vec(&header_for(params)).expect("header serializes");
    out.push(b'\n');
    for t in &params.data {
        for v in t {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn from_reader(reader: impl Read) -> Result<Params<f32>, ModelError> {
    let mut r = BufReader::new(reader);
    let mut line = Vec::new();
    r.read_until(b'\n', &mut line)?;
    let header: CheckpointHeader = serde_json::from_slice(&line)
        .map_err(|e| ModelError::Checkpoint(format!("bad header: {e}")))?;
    if header.magic != MAGIC {
        return Err(ModelError::Checkpoint(format!(
            "bad magic `{}`",
            header.magic
        )));
    }
    if header.version != VERSION {
        return Err(ModelError::Checkpoint(format!(
            "unsupported version {}",
            header.version
        )));
    }
    let config = ModelConfig {
        d_model: header.d_model,
        embed_dim: header.embed_dim,
        layers: header.layers,
        heads: header.heads,
        vocab: header.vocab,
        image_size: header.image_size,
        patch: header.patch,
        max_tokens: header.max_tokens,
    };
    config.validate().map_err(ModelError::Checkpoint)?;
    let mut data = Vec::with_capacity(header.tensors.len());
    for (name, rows, cols) in &header.tensors {
        let mut bytes = vec![0u8; rows * cols * 4];
        r.read_exact(&mut bytes)
            .map_err(|e| ModelError::Checkpoint(format!("tensor {name} truncated: {e}")))?;
        data.push(
            bytes
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
                .collect(),
        );
    }
    if r.fill_buf()?.is_empty() {
        let params = Params::from_tensors(config, data).map_err(ModelError::Checkpoint)?;
        let names_match = params
            .specs
            .iter()
            .zip(&header.tensors)
            .all(|(s, (n, r, c))| &s.name == n && s.rows == *r && s.cols == *c);
        if !names_match {
            return Err(ModelError::Checkpoint(
                "tensor list does not match the model layout".into(),
            ));
        }
        if !params.all_finite() {
            return Err(ModelError::Checkpoint("non-finite parameter values".into()));
        }
        Ok(params)
    } else {
        Err(ModelError::Checkpoint(
            "trailing bytes after the last tensor".into(),
        ))
    }
}

pub fn save(params: &Params<f32>, path: &Path) -> Result<(), ModelError> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&to_bytes(params))?;
    w.into_inner().map_err(|e| e.into_error())?.sync_all()?;
    Ok(())
}

pub fn load(path: &Path) -> Result<Params<f32>, ModelError> {
    from_reader(File::open(path)?)
}
