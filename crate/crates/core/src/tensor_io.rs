//! Raw tensor files for `infer` inputs and debug dumps.
//!
//! Layout, all little-endian:
//!
//! ```text
//! b"PCVT"                magic
//! u32                    header length in bytes
//! [u8; header length]    UTF-8 JSON: {"shape": [..], "dtype": "f32"|"f64"|"u32", "channels": [..]?}
//! data                   row-major elements, last axis fastest
//! ```
//!
//! A vote tensor has shape `[H, W, K + 1]`; channel `K` is abstention. A
//! semantic map has shape `[H, W]` and dtype `u32`, with `4294967295` for void.

use std::fs;
use std::path::Path;

use ndarray::{Array2, Array3, ArrayD, IxDyn};
use serde::{Deserialize, Serialize};

use crate::aggregate::VoteTensor;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"PCVT";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DType {
    F32,
    F64,
    U32,
}

impl DType {
    fn width(self) -> usize {
        match self {
            DType::F32 | DType::U32 => 4,
            DType::F64 => 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorHeader {
    pub shape: Vec<usize>,
    pub dtype: DType,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channels: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TensorData {
    Float(ArrayD<f64>),
    Unsigned(ArrayD<u32>),
}

fn malformed(path: &Path, detail: impl Into<String>) -> Error {
    Error::MalformedTensor {
        path: path.to_path_buf(),
        detail: detail.into(),
    }
}

pub fn read_tensor(path: &Path) -> Result<(TensorHeader, TensorData)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() < 8 || &bytes[..4] != MAGIC {
        return Err(malformed(path, "missing PCVT magic"));
    }
    let hlen = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let body = 8 + hlen;
    if bytes.len() < body {
        return Err(malformed(path, "truncated header"));
    }
    let header: TensorHeader = serde_json::from_slice(&bytes[8..body])
        .map_err(|e| malformed(path, format!("bad header: {e}")))?;
    let count = header
        .shape
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| malformed(path, "shape overflows"))?;
    let data = &bytes[body..];
    if Some(data.len()) != count.checked_mul(header.dtype.width()) {
        return Err(malformed(
            path,
            format!(
                "expected {count} {:?} elements, found {} bytes",
                header.dtype,
                data.len()
            ),
        ));
    }
    let shape = IxDyn(&header.shape);
    let tensor = match header.dtype {
        DType::F32 => TensorData::Float(
            ArrayD::from_shape_vec(
                shape,
                data.chunks_exact(4)
                    .map(|b| f32::from_le_bytes(b.try_into().unwrap()) as f64)
                    .collect(),
            )
            .unwrap(),
        ),
        DType::F64 => TensorData::Float(
            ArrayD::from_shape_vec(
                shape,
                data.chunks_exact(8)
                    .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
                    .collect(),
            )
            .unwrap(),
        ),
        DType::U32 => TensorData::Unsigned(
            ArrayD::from_shape_vec(
                shape,
                data.chunks_exact(4)
                    .map(|b| u32::from_le_bytes(b.try_into().unwrap()))
                    .collect(),
            )
            .unwrap(),
        ),
    };
    Ok((header, tensor))
}

fn write_raw(path: &Path, header: &TensorHeader, data: Vec<u8>) -> Result<()> {
    let json = serde_json::to_vec(header).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    let mut out = Vec::with_capacity(8 + json.len() + data.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    out.extend_from_slice(&data);
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Writes floats as `f32` or `f64`.
pub fn write_float(
    path: &Path,
    data: &ArrayD<f64>,
    dtype: DType,
    channels: Option<Vec<String>>,
) -> Result<()> {
    let bytes: Vec<u8> = match dtype {
        DType::F32 => data
            .iter()
            .flat_map(|&v| (v as f32).to_le_bytes())
            .collect(),
        DType::F64 => data.iter().flat_map(|&v| v.to_le_bytes()).collect(),
        DType::U32 => {
            return Err(Error::InvalidArgument(
                "float data cannot be written as u32".into(),
            ))
        }
    };
    let header = TensorHeader {
        shape: data.shape().to_vec(),
        dtype,
        channels,
    };
    write_raw(path, &header, bytes)
}

pub fn write_unsigned(path: &Path, data: &ArrayD<u32>) -> Result<()> {
    let header = TensorHeader {
        shape: data.shape().to_vec(),
        dtype: DType::U32,
        channels: None,
    };
    write_raw(
        path,
        &header,
        data.iter().flat_map(|v| v.to_le_bytes()).collect(),
    )
}

/// Channel legend `cell 0`, .., `cell K-1`, `abstain`.
pub fn vote_legend(num_cells: usize) -> Vec<String> {
    (0..num_cells)
        .map(|k| format!("cell {k}"))
        .chain(std::iter::once("abstain".to_string()))
        .collect()
}

pub fn write_votes(path: &Path, votes: &VoteTensor, dtype: DType) -> Result<()> {
    let k = votes.channels() - 1;
    write_float(
        path,
        &votes.probs().clone().into_dyn(),
        dtype,
        Some(vote_legend(k)),
    )
}

/// Reads a `[H, W, K + 1]` float tensor; distributions must sum to 1.
pub fn read_votes(path: &Path, num_cells: usize) -> Result<VoteTensor> {
    let (header, data) = read_tensor(path)?;
    let TensorData::Float(arr) = data else {
        return Err(malformed(path, "vote tensor must be f32 or f64"));
    };
    if header.shape.len() != 3 || header.shape[2] != num_cells + 1 {
        return Err(Error::shape(
            format!("[H, W, {}]", num_cells + 1),
            format!("{:?}", header.shape),
        ));
    }
    let probs: Array3<f64> = arr.into_dimensionality().unwrap();
    let (h, w, _) = probs.dim();
    VoteTensor::new(probs, Array2::from_elem((h, w), false))
}

pub fn write_semantic(path: &Path, semantic: &Array2<u32>) -> Result<()> {
    write_unsigned(path, &semantic.clone().into_dyn())
}

pub fn read_semantic(path: &Path) -> Result<Array2<u32>> {
    let (header, data) = read_tensor(path)?;
    let TensorData::Unsigned(arr) = data else {
        return Err(malformed(path, "semantic map must be u32"));
    };
    if header.shape.len() != 2 {
        return Err(Error::shape("[H, W]", format!("{:?}", header.shape)));
    }
    Ok(arr.into_dimensionality().unwrap())
}
