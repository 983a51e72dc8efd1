//! Versioned binary checkpoints.
//!
//! Layout, little-endian throughout:
//!
//! | field | type |
//! |-------|------|
//! | magic | `b"VSPM"` |
//! | format version | u32 |
//! | descriptor length | u32 |
//! | descriptor | UTF-8 JSON `{"architecture": .., "tensors": [{"name", "shape"}]}` |
//! | tensor data | f32 values of every tensor, in descriptor order |

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::tensor::{Param, Real};
use super::NnError;

pub const MAGIC: &[u8; 4] = b"VSPM";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorSpec {
    pub name: String,
    pub shape: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Descriptor {
    architecture: serde_json::Value,
    tensors: Vec<TensorSpec>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub architecture: serde_json::Value,
    pub tensors: Vec<(TensorSpec, Vec<f32>)>,
}

fn bad(msg: impl Into<String>) -> NnError {
    NnError::Checkpoint(msg.into())
}

pub fn write_checkpoint<W: Write, T: Real>(
    mut w: W,
    architecture: &serde_json::Value,
    params: &[&Param<T>],
) -> Result<(), NnError> {
    let desc = Descriptor {
        architecture: architecture.clone(),
        tensors: params
            .iter()
            .map(|p| TensorSpec {
                name: p.name.clone(),
                shape: p.value.shape().to_vec(),
            })
            .collect(),
    };
    let json = serde_json::to_vec(&desc).map_err(|e| bad(e.to_string()))?;
    w.write_all(MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&(json.len() as u32).to_le_bytes())?;
    w.write_all(&json)?;
    for p in params {
        let mut buf = Vec::with_capacity(p.value.len() * 4);
        for v in p.value.data() {
            buf.extend_from_slice(&(v.as_f64() as f32).to_le_bytes());
        }
        w.write_all(&buf)?;
    }
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32, NnError> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

pub fn read_checkpoint<R: Read>(mut r: R) -> Result<Checkpoint, NnError> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(bad("not a model checkpoint (bad magic)"));
    }
    let version = read_u32(&mut r)?;
    if version != FORMAT_VERSION {
        return Err(bad(format!("unsupported checkpoint version {version}")));
    }
    let len = read_u32(&mut r)? as usize;
    if len > 1 << 24 {
        return Err(bad("descriptor too large"));
    }
    let mut json = vec![0u8; len];
    r.read_exact(&mut json)?;
    let desc: Descriptor = serde_json::from_slice(&json).map_err(|e| bad(format!("descriptor: {e}")))?;
    let mut tensors = Vec::with_capacity(desc.tensors.len());
    for spec in desc.tensors {
        let n: usize = spec.shape.iter().product();
        if n > 1 << 28 {
            return Err(bad(format!("tensor {} too large", spec.name)));
        }
        let mut raw = vec![0u8; n * 4];
        r.read_exact(&mut raw)?;
        let data = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        tensors.push((spec, data));
    }
    Ok(Checkpoint {
        architecture: desc.architecture,
        tensors,
    })
}

/// Copies checkpoint tensors into `params`, which must match in order, name
/// and shape.
pub fn load_params<T: Real>(params: &mut [&mut Param<T>], ckpt: &Checkpoint) -> Result<(), NnError> {
    if params.len() != ckpt.tensors.len() {
        return Err(bad(format!(
            "checkpoint holds {} tensors, model expects {}",
            ckpt.tensors.len(),
            params.len()
        )));
    }
    for (p, (spec, data)) in params.iter_mut().zip(&ckpt.tensors) {
        if p.name != spec.name || p.value.shape() != spec.shape.as_slice() {
            return Err(bad(format!(
                "tensor {} {:?} does not match model tensor {} {:?}",
                spec.name,
                spec.shape,
                p.name,
                p.value.shape()
            )));
        }
        for (dst, &src) in p.value.data_mut().iter_mut().zip(data) {
            *dst = T::lit(src as f64);
        }
    }
    Ok(())
}
