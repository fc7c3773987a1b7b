//! Weight container I/O.
//!
//! A container is a single file: a UTF-8 JSON manifest, a `\0` separator,
//! then the concatenated raw little-endian f32 blobs. The manifest holds the
//! model config and one entry per tensor (`dtype`, `shape`, byte `offset`
//! into the blob section, byte `len`). Entries and blobs are laid out in
//! sorted name order, so a given model serializes to identical bytes
//! everywhere. Loading validates every array's shape against the config and
//! reports missing, unknown, truncated, or misshapen tensors by name.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{build_model, Model, ModelConfig, SlotMut, SlotRef};
use crate::scalar::Dtype;

#[derive(Debug, Serialize, Deserialize)]
struct ManifestEntry {
    dtype: Dtype,
    shape: Vec<usize>,
    offset: usize,
    len: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    config: ModelConfig,
    tensors: BTreeMap<String, ManifestEntry>,
}

fn slot_shape(slot: &SlotRef<'_, f32>) -> Vec<usize> {
    match slot {
        SlotRef::Tensor(t) => {
            let s = t.shape();
            vec![s.n, s.c, s.h, s.w]
        }
        SlotRef::Vector(v) => vec![v.len()],
    }
}

fn slot_mut_shape(slot: &SlotMut<'_, f32>) -> Vec<usize> {
    match slot {
        SlotMut::Tensor(t) => {
            let s = t.shape();
            vec![s.n, s.c, s.h, s.w]
        }
        SlotMut::Vector(v) => vec![v.len()],
    }
}

/// Serialize a model to container bytes.
pub fn to_bytes(model: &Model<f32>) -> Result<Vec<u8>> {
    let slots: BTreeMap<String, SlotRef<'_, f32>> = model.named_slots().into_iter().collect();
    let mut tensors = BTreeMap::new();
    let mut blob: Vec<u8> = Vec::new();
    for (name, slot) in &slots {
        let shape = slot_shape(slot);
        let data: &[f32] = match slot {
            SlotRef::Tensor(t) => t.data(),
            SlotRef::Vector(v) => v,
        };
        let offset = blob.len();
        for v in data {
            blob.extend_from_slice(&v.to_le_bytes());
        }
        tensors.insert(
            name.clone(),
            ManifestEntry {
                dtype: Dtype::F32,
                shape,
                offset,
                len: blob.len() - offset,
            },
        );
    }
    let manifest = Manifest {
        config: model.config.clone(),
        tensors,
    };
    let mut out = serde_json::to_vec(&manifest)?;
    out.push(0);
    out.extend_from_slice(&blob);
    Ok(out)
}

/// Parse container bytes back into a model.
pub fn from_bytes(bytes: &[u8]) -> Result<Model<f32>> {
    let sep = bytes
        .iter()
        .position(|&b| b == 0)
        .ok_or_else(|| Error::Truncated("no manifest separator found".to_string()))?;
    let manifest: Manifest = serde_json::from_slice(&bytes[..sep])?;
    let blob = &bytes[sep + 1..];

    let mut model = build_model::<f32>(&manifest.config, 0)?;
    let mut consumed = Vec::new();
    for (name, slot) in model.named_slots_mut() {
        let entry = manifest
            .tensors
            .get(&name)
            .ok_or_else(|| Error::MissingWeight { name: name.clone() })?;
        let expected = slot_mut_shape(&slot);
        if entry.shape != expected {
            return Err(Error::WeightShape {
                name,
                expected,
                found: entry.shape.clone(),
            });
        }
        if entry.dtype != Dtype::F32 {
            return Err(Error::Truncated(format!(
                "tensor `{name}`: unsupported dtype {:?}",
                entry.dtype
            )));
        }
        let numel: usize = entry.shape.iter().product();
        if entry.len != numel * 4 {
            return Err(Error::Truncated(format!(
                "tensor `{name}`: byte length {} != 4 * {numel}",
                entry.len
            )));
        }
        let end = entry
            .offset
            .checked_add(entry.len)
            .filter(|&e| e <= blob.len());
        let Some(end) = end else {
            return Err(Error::Truncated(format!(
                "tensor `{name}`: range {}..{} exceeds blob of {} bytes",
                entry.offset,
                entry.offset + entry.len,
                blob.len()
            )));
        };
        let raw = &blob[entry.offset..end];
        let dst: &mut [f32] = match slot {
            SlotMut::Tensor(t) => t.data_mut(),
            SlotMut::Vector(v) => v,
        };
        for (d, chunk) in dst.iter_mut().zip(raw.chunks_exact(4)) {
            *d = f32::from_le_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]);
        }
        consumed.push(name);
    }
    if manifest.tensors.len() != consumed.len() {
        consumed.sort();
        for name in manifest.tensors.keys() {
            if consumed.binary_search(name).is_err() {
                return Err(Error::UnknownWeight { name: name.clone() });
            }
        }
    }
    Ok(model)
}

/// Write a model to a container file.
pub fn save_weights(model: &Model<f32>, path: impl AsRef<Path>) -> Result<()> {
    let bytes = to_bytes(model)?;
    let mut file = std::fs::File::create(path)?;
    file.write_all(&bytes)?;
    Ok(())
}

/// Read a container file back into a model.
pub fn load_weights(path: impl AsRef<Path>) -> Result<Model<f32>> {
    let bytes = std::fs::read(path)?;
    from_bytes(&bytes)
}
