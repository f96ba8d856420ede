//! Binary probe checkpoints.
//!
//! Layout, all little-endian:
//!
//! ```text
//! magic      4 bytes  "PRB1"
//! D          u32
//! C          u32
//! D_h        u32
//! activation u32      0 = relu, 1 = gelu
//! query, w_key, w_value, w_mlp1, b_mlp1, w_mlp2, b_mlp2, w_cls, b_cls
//!            f64 each, row-major
//! ```

use std::path::Path;

use crate::error::{Error, Result};

use super::model::{Activation, ProbeParams, ProbeShape};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"PRB1";

pub fn encode_checkpoint(params: &ProbeParams) -> Vec<u8> {
    let shape = params.shape();
    let mut out = Vec::with_capacity(20 + 8 * params.n_params());
    out.extend_from_slice(CHECKPOINT_MAGIC);
    for v in [shape.dim, shape.classes, shape.hidden] {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    out.extend_from_slice(&shape.activation.code().to_le_bytes());
    for (_, t) in params.tensors() {
        for v in t {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<ProbeParams> {
    if bytes.len() < 20 || &bytes[..4] != CHECKPOINT_MAGIC {
        return Err(Error::format("not a probe checkpoint"));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().unwrap());
    let activation = Activation::from_code(word(3))
        .ok_or_else(|| Error::format(format!("unknown activation code {}", word(3))))?;
    let shape = ProbeShape {
        dim: word(0) as usize,
        classes: word(1) as usize,
        hidden: word(2) as usize,
        activation,
    };
    let mut params = ProbeParams::zeros(shape);
    let body = &bytes[20..];
    if body.len() != 8 * params.n_params() {
        return Err(Error::format(format!(
            "checkpoint body has {} bytes, expected {}",
            body.len(),
            8 * params.n_params()
        )));
    }
    let mut values = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()));
    for t in params.tensors_mut() {
        for v in t.iter_mut() {
            *v = values.next().unwrap();
        }
    }
    Ok(params)
}

pub fn write_checkpoint(path: impl AsRef<Path>, params: &ProbeParams) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_checkpoint(params)).map_err(|e| Error::io(path, e))
}

pub fn read_checkpoint(path: impl AsRef<Path>) -> Result<ProbeParams> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes)
}
