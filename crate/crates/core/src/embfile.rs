//! `TARAEMB1` binary embedding files.
//!
//! Layout, all integers little-endian:
//!
//! | offset | size | field                              |
//! |--------|------|------------------------------------|
//! | 0      | 8    | magic `TARAEMB1`                   |
//! | 8      | 4    | version, always 1                  |
//! | 12     | 4    | rows                               |
//! | 16     | 4    | dim                                |
//! | 20     | 1    | dtype, 0 = IEEE-754 binary32       |
//! | 21     | 1    | normalized flag, 0 or 1            |
//! | 22     | 2    | reserved, zero                     |
//! | 24     | …    | rows × dim `f32` values, row-major |
//!
//! Row ids live in a sidecar manifest: one `{"row": int, "id": str}` per line.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::embed::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::io;

pub const MAGIC: &[u8; 8] = b"TARAEMB1";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 24;
pub const DTYPE_F32: u8 = 0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EmbFileHeader {
    pub version: u32,
    pub rows: u32,
    pub dim: u32,
    pub dtype: u8,
    pub normalized: bool,
}

impl EmbFileHeader {
    pub fn to_bytes(&self) -> [u8; HEADER_LEN] {
        let mut out = [0u8; HEADER_LEN];
        out[..8].copy_from_slice(MAGIC);
        out[8..12].copy_from_slice(&self.version.to_le_bytes());
        out[12..16].copy_from_slice(&self.rows.to_le_bytes());
        out[16..20].copy_from_slice(&self.dim.to_le_bytes());
        out[20] = self.dtype;
        out[21] = self.normalized as u8;
        out
    }

    pub fn parse(bytes: &[u8]) -> Result<Self> {
        let magic_len = bytes.len().min(MAGIC.len());
        if bytes[..magic_len] != MAGIC[..magic_len] {
            return Err(Error::BadMagic(bytes[..magic_len].to_vec()));
        }
        if bytes.len() < HEADER_LEN {
            return Err(Error::SizeMismatch {
                expected: HEADER_LEN as u64,
                actual: bytes.len() as u64,
            });
        }
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
        let header = EmbFileHeader {
            version: u32_at(8),
            rows: u32_at(12),
            dim: u32_at(16),
            dtype: bytes[20],
            normalized: match bytes[21] {
                0 => false,
                1 => true,
                v => return Err(Error::invalid(format!("normalized flag must be 0 or 1, got {v}"))),
            },
        };
        if header.version != VERSION {
            return Err(Error::invalid(format!("unsupported version {}", header.version)));
        }
        if header.dtype != DTYPE_F32 {
            return Err(Error::invalid(format!("unsupported dtype {}", header.dtype)));
        }
        if bytes[22..24] != [0, 0] {
            return Err(Error::invalid("reserved header bytes must be zero"));
        }
        Ok(header)
    }

    pub fn payload_len(&self) -> u64 {
        self.rows as u64 * self.dim as u64 * 4
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ManifestRow {
    row: u64,
    id: String,
}

pub fn encode(m: &EmbeddingMatrix) -> Result<(Vec<u8>, String)> {
    let to_u32 = |v: usize, what: &str| {
        u32::try_from(v).map_err(|_| Error::invalid(format!("{what} {v} exceeds u32")))
    };
    let header = EmbFileHeader {
        version: VERSION,
        rows: to_u32(m.rows(), "rows")?,
        dim: to_u32(m.dim(), "dim")?,
        dtype: DTYPE_F32,
        normalized: m.is_normalized(),
    };
    let mut bytes = Vec::with_capacity(HEADER_LEN + m.data().len() * 4);
    bytes.extend_from_slice(&header.to_bytes());
    for v in m.data() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    let manifest = io::to_jsonl(m.ids().iter().enumerate().map(|(row, id)| ManifestRow {
        row: row as u64,
        id: id.clone(),
    }));
    Ok((bytes, manifest))
}

/// Decodes the binary part only.
pub fn decode_payload(bytes: &[u8]) -> Result<(EmbFileHeader, Vec<f32>)> {
    let header = EmbFileHeader::parse(bytes)?;
    let actual = (bytes.len() - HEADER_LEN) as u64;
    if header.dim == 0 {
        return Err(Error::invalid("dim must be at least 1"));
    }
    if actual != header.payload_len() {
        return Err(Error::SizeMismatch {
            expected: header.payload_len(),
            actual,
        });
    }
    let values = bytes[HEADER_LEN..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok((header, values))
}

pub fn parse_manifest(text: &str, rows: usize) -> Result<Vec<String>> {
    let mut ids: Vec<Option<String>> = vec![None; rows];
    for (line, raw) in io::records(text) {
        let rec: ManifestRow = serde_json::from_str(raw).map_err(|e| Error::parse(line, e))?;
        let slot = usize::try_from(rec.row)
            .ok()
            .and_then(|r| ids.get_mut(r))
            .ok_or_else(|| Error::parse(line, format!("row {} out of range 0..{rows}", rec.row)))?;
        if slot.is_some() {
            return Err(Error::parse(line, format!("duplicate manifest row {}", rec.row)));
        }
        *slot = Some(rec.id);
    }
    ids.into_iter()
        .enumerate()
        .map(|(i, id)| id.ok_or_else(|| Error::invalid(format!("manifest is missing row {i}"))))
        .collect()
}

pub fn decode(bytes: &[u8], manifest: &str) -> Result<EmbeddingMatrix> {
    let (header, values) = decode_payload(bytes)?;
    let ids = parse_manifest(manifest, header.rows as usize)?;
    EmbeddingMatrix::new(ids, header.dim as usize, values, header.normalized)
}

/// Default sidecar path: `vectors.emb` → `vectors.manifest.jsonl`.
pub fn manifest_path_for(path: &Path) -> PathBuf {
    path.with_extension("manifest.jsonl")
}

pub fn write_embeddings(m: &EmbeddingMatrix, path: &Path, manifest_path: &Path) -> Result<()> {
    let (bytes, manifest) = encode(m)?;
    io::write_atomic(path, &bytes)?;
    io::write_atomic(manifest_path, manifest.as_bytes())
}

pub fn read_embeddings(path: &Path, manifest_path: &Path) -> Result<EmbeddingMatrix> {
    let bytes = io::read_bytes(path)?;
    let manifest = io::read_to_string(manifest_path)?;
    decode(&bytes, &manifest)
}
