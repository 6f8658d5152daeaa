//! `ETL1` checkpoint files.
//!
//! ```text
//! "ETL1"  u32 tensor_count
//! per tensor: u32 name_len, name (UTF-8), u32 ndims, u32 dims[ndims], f32 data[Π dims]
//! u32 config_hash
//! ```
//!
//! Little-endian throughout, data row-major.

use std::collections::HashMap;
use std::path::Path;

use crate::dataio::storage::{read_bytes, write_file, Cursor};
use crate::error::{Error, Result};
use crate::model::{EtlModel, ModelSpec};
use crate::numerics::Parameters;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"ETL1";

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    pub name: String,
    pub dims: Vec<usize>,
    pub data: Vec<f32>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub tensors: Vec<Tensor>,
    pub config_hash: u32,
}

pub fn checkpoint_bytes(model: &EtlModel) -> Vec<u8> {
    let tensors = model.tensors();
    let mut buf = Vec::new();
    buf.extend_from_slice(CHECKPOINT_MAGIC);
    buf.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for (name, dims, data) in tensors {
        buf.extend_from_slice(&(name.len() as u32).to_le_bytes());
        buf.extend_from_slice(name.as_bytes());
        buf.extend_from_slice(&(dims.len() as u32).to_le_bytes());
        for d in dims {
            buf.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for v in data {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    buf.extend_from_slice(&model.spec.hash().to_le_bytes());
    buf
}

pub fn parse_checkpoint(bytes: &[u8]) -> Result<Checkpoint> {
    let mut cur = Cursor::new(bytes, "checkpoint");
    if cur.take(4)? != CHECKPOINT_MAGIC {
        return Err(Error::Format("checkpoint lacks the ETL1 magic".into()));
    }
    let count = cur.u32()? as usize;
    let mut tensors = Vec::with_capacity(count.min(1024));
    for _ in 0..count {
        let len = cur.u32()? as usize;
        let name = std::str::from_utf8(cur.take(len)?)
            .map_err(|_| Error::Format("tensor name is not UTF-8".into()))?
            .to_string();
        let ndims = cur.u32()? as usize;
        let dims = (0..ndims)
            .map(|_| cur.u32().map(|d| d as usize))
            .collect::<Result<Vec<_>>>()?;
        let n: usize = dims.iter().product();
        if n * 4 > cur.remaining() {
            return Err(Error::Format(format!("tensor `{name}` is truncated")));
        }
        let data = (0..n).map(|_| cur.f32()).collect::<Result<Vec<_>>>()?;
        tensors.push(Tensor { name, dims, data });
    }
    let config_hash = cur.u32()?;
    cur.finish()?;
    Ok(Checkpoint {
        tensors,
        config_hash,
    })
}

pub fn save_checkpoint(model: &EtlModel, path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), &checkpoint_bytes(model))
}

pub fn read_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    parse_checkpoint(&read_bytes(path.as_ref())?)
}

/// Loads a checkpoint into a model of shape `spec`. The stored hash must
/// match `spec.hash()` and every tensor must be present with the right shape.
pub fn load_checkpoint(path: impl AsRef<Path>, spec: ModelSpec) -> Result<EtlModel> {
    model_from_checkpoint(&read_checkpoint(path)?, spec)
}

pub fn model_from_checkpoint(ckpt: &Checkpoint, spec: ModelSpec) -> Result<EtlModel> {
    if ckpt.config_hash != spec.hash() {
        return Err(Error::Format(format!(
            "checkpoint hash {:08x} does not match config hash {:08x}",
            ckpt.config_hash,
            spec.hash()
        )));
    }
    let mut model = EtlModel::zeros(spec)?;
    let expected: Vec<(String, Vec<usize>)> = model
        .tensors()
        .into_iter()
        .map(|(n, d, _)| (n, d))
        .collect();
    if expected.len() != ckpt.tensors.len() {
        return Err(Error::Format(format!(
            "checkpoint has {} tensors, model needs {}",
            ckpt.tensors.len(),
            expected.len()
        )));
    }
    let by_name: HashMap<&str, &Tensor> =
        ckpt.tensors.iter().map(|t| (t.name.as_str(), t)).collect();
    for (name, dims) in &expected {
        match by_name.get(name.as_str()) {
            Some(t) if &t.dims == dims => {}
            Some(t) => {
                return Err(Error::Format(format!(
                    "tensor `{name}` has shape {:?}, expected {dims:?}",
                    t.dims
                )))
            }
            None => return Err(Error::Format(format!("checkpoint lacks tensor `{name}`"))),
        }
    }
    model.visit_mut("", &mut |name, dst| {
        dst.copy_from_slice(&by_name[name].data)
    });
    if !model.is_finite() {
        return Err(Error::Format(
            "checkpoint contains non-finite values".into(),
        ));
    }
    Ok(model)
}
