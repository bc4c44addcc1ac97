//! Binary tensor container shared by checkpoints and the feature cache.
//!
//! Layout: the 8-byte magic `LIDF0001`, a little-endian u64 header length, a
//! UTF-8 JSON header, then every tensor's data as little-endian f32 in header
//! order. The header carries a SHA-256 of the payload so truncation and bit
//! rot are detected on load.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{LidError, Result};

pub const MAGIC: &[u8; 8] = b"LIDF0001";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub kind: String,
    pub meta: serde_json::Value,
    pub tensors: Vec<TensorEntry>,
    pub payload_sha256: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Container {
    pub kind: String,
    pub meta: serde_json::Value,
    pub tensors: Vec<(TensorEntry, Vec<f32>)>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex(&Sha256::digest(bytes))
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn corrupt(msg: impl Into<String>) -> LidError {
    LidError::InvalidCheckpoint(msg.into())
}

impl Container {
    pub fn new(kind: impl Into<String>, meta: serde_json::Value) -> Self {
        Self { kind: kind.into(), meta, tensors: Vec::new() }
    }

    pub fn push(&mut self, name: impl Into<String>, shape: Vec<usize>, data: Vec<f32>) -> Result<()> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(LidError::InvalidArgument(format!("shape {shape:?} does not hold {} values", data.len())));
        }
        self.tensors.push((TensorEntry { name: name.into(), shape }, data));
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<(&[usize], &[f32])> {
        self.tensors.iter().find(|(e, _)| e.name == name).map(|(e, d)| (e.shape.as_slice(), d.as_slice()))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut payload = Vec::with_capacity(4 * self.tensors.iter().map(|(_, d)| d.len()).sum::<usize>());
        for (_, data) in &self.tensors {
            for v in data {
                payload.extend_from_slice(&v.to_le_bytes());
            }
        }
        let header = Header {
            kind: self.kind.clone(),
            meta: self.meta.clone(),
            tensors: self.tensors.iter().map(|(e, _)| e.clone()).collect(),
            payload_sha256: sha256_hex(&payload),
        };
        let header = serde_json::to_vec(&header).expect("header serializes");
        let mut out = Vec::with_capacity(16 + header.len() + payload.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(header.len() as u64).to_le_bytes());
        out.extend_from_slice(&header);
        out.extend_from_slice(&payload);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 16 || &bytes[..8] != MAGIC {
            return Err(corrupt("missing container magic"));
        }
        let hlen = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
        let body = bytes.get(16..16usize.saturating_add(hlen)).ok_or_else(|| corrupt("truncated header"))?;
        let header: Header = serde_json::from_slice(body).map_err(|e| corrupt(format!("bad header: {e}")))?;
        let payload = &bytes[16 + hlen..];
        if sha256_hex(payload) != header.payload_sha256 {
            return Err(corrupt("payload checksum mismatch"));
        }
        let total: usize = header.tensors.iter().map(|e| e.shape.iter().product::<usize>()).sum();
        if payload.len() != total * 4 {
            return Err(corrupt(format!("payload holds {} bytes, header declares {}", payload.len(), total * 4)));
        }
        let mut values = payload.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap()));
        let tensors = header
            .tensors
            .into_iter()
            .map(|e| {
                let n = e.shape.iter().product();
                let data: Vec<f32> = values.by_ref().take(n).collect();
                (e, data)
            })
            .collect();
        Ok(Self { kind: header.kind, meta: header.meta, tensors })
    }

    /// Writes through a temporary sibling and renames, so readers never see a
    /// partial file.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(|e| LidError::io(dir, e))?;
        }
        let tmp = path.with_extension("tmp");
        let mut f = fs::File::create(&tmp).map_err(|e| LidError::io(&tmp, e))?;
        f.write_all(&self.to_bytes()).map_err(|e| LidError::io(&tmp, e))?;
        drop(f);
        fs::rename(&tmp, path).map_err(|e| LidError::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| LidError::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}
