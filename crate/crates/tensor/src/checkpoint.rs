//! Checkpoint container.
//!
//! Layout:
//!
//! ```text
//! magic   8 bytes   "LXGZCKP1"
//! hlen    u64 LE    length of the header in bytes
//! header  hlen      UTF-8 JSON: {"format_version", "meta", "manifest"}
//! data    ...       f64 LE, parameters concatenated in manifest order
//! ```
//!
//! `manifest` lists `{name, group, offset, shape}` per parameter, with
//! `offset` counted in f64 elements from the start of the data section.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Result, TensorError};
use crate::params::{LrGroup, ParamStore};
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 8] = b"LXGZCKP1";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ManifestEntry {
    pub name: String,
    pub group: LrGroup,
    pub offset: usize,
    pub shape: Vec<usize>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct Header {
    format_version: u32,
    meta: serde_json::Value,
    manifest: Vec<ManifestEntry>,
}

pub fn to_bytes(meta: &serde_json::Value, store: &ParamStore) -> Result<Vec<u8>> {
    let mut manifest = Vec::with_capacity(store.len());
    let mut offset = 0;
    for (_, p) in store.iter() {
        manifest.push(ManifestEntry {
            name: p.name.clone(),
            group: p.group,
            offset,
            shape: p.value.shape().to_vec(),
        });
        offset += p.value.numel();
    }
    let header = serde_json::to_vec(&Header {
        format_version: FORMAT_VERSION,
        meta: meta.clone(),
        manifest,
    })?;
    let mut out = Vec::with_capacity(16 + header.len() + offset * 8);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(header.len() as u64).to_le_bytes());
    out.extend_from_slice(&header);
    for (_, p) in store.iter() {
        for v in p.value.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

/// Parsed checkpoint: metadata plus the named parameters in stored order.
pub struct Checkpoint {
    pub meta: serde_json::Value,
    pub params: Vec<(ManifestEntry, Tensor)>,
}

impl Checkpoint {
    /// Copies stored values into `store`; every parameter of `store` must be
    /// present with the same shape.
    pub fn load_into(&self, store: &mut ParamStore) -> Result<()> {
        if self.params.len() != store.len() {
            return Err(TensorError::Checkpoint(format!(
                "checkpoint has {} parameters, model has {}",
                self.params.len(),
                store.len()
            )));
        }
        for (entry, t) in &self.params {
            let id = store.id(&entry.name)?;
            let p = store.get_mut(id);
            if p.value.shape() != t.shape() {
                return Err(TensorError::ShapeMismatch {
                    op: "checkpoint load",
                    lhs: p.value.shape().to_vec(),
                    rhs: t.shape().to_vec(),
                });
            }
            p.value = t.clone();
        }
        Ok(())
    }
}

pub fn from_bytes(bytes: &[u8]) -> Result<Checkpoint> {
    let bad = |m: &str| TensorError::Checkpoint(m.to_string());
    if bytes.len() < 16 || &bytes[..8] != MAGIC {
        return Err(bad("missing magic"));
    }
    let hlen = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
    let data_start = 16usize.checked_add(hlen).ok_or_else(|| bad("header length overflow"))?;
    if bytes.len() < data_start {
        return Err(bad("truncated header"));
    }
    let header: Header = serde_json::from_slice(&bytes[16..data_start])?;
    if header.format_version != FORMAT_VERSION {
        return Err(bad(&format!("unsupported format version {}", header.format_version)));
    }
    let data = &bytes[data_start..];
    let mut params = Vec::with_capacity(header.manifest.len());
    for entry in header.manifest {
        let n: usize = entry.shape.iter().product();
        let start = entry.offset * 8;
        let end = start + n * 8;
        if end > data.len() {
            return Err(bad(&format!("parameter `{}` runs past end of data", entry.name)));
        }
        let values = data[start..end]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        let t = Tensor::new(entry.shape.clone(), values)?;
        params.push((entry, t));
    }
    Ok(Checkpoint {
        meta: header.meta,
        params,
    })
}

pub fn save(path: &Path, meta: &serde_json::Value, store: &ParamStore) -> Result<()> {
    let bytes = to_bytes(meta, store)?;
    let mut f = fs::File::create(path)?;
    f.write_all(&bytes)?;
    Ok(())
}

pub fn load(path: &Path) -> Result<Checkpoint> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    from_bytes(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_preserves_values_and_meta() {
        let mut s = ParamStore::new();
        s.add("a.w", LrGroup::EncoderDecoder, Tensor::new(vec![2, 2], vec![1.5, -0.25, 3.0, 1e-300]).unwrap())
            .unwrap();
        s.add("b", LrGroup::Backbone, Tensor::from_vec(vec![f64::MAX, -0.0])).unwrap();
        let meta = serde_json::json!({"threshold": 0.37});
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        save(&path, &meta, &s).unwrap();
        let ck = load(&path).unwrap();
        assert_eq!(ck.meta, meta);
        let mut t = s.clone();
        t.iter_mut().for_each(|p| p.value.data_mut().iter_mut().for_each(|v| *v = 0.0));
        ck.load_into(&mut t).unwrap();
        for ((_, a), (_, b)) in s.iter().zip(t.iter()) {
            assert_eq!(a.value.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                       b.value.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        }
        assert_eq!(ck.params[1].0.offset, 4);
    }

    #[test]
    fn rejects_garbage() {
        assert!(from_bytes(b"not a checkpoint at all").is_err());
    }
}
