//! `EMB1` tensor files and their JSON token sidecars.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! offset 0   magic      b"EMB1"
//! offset 4   dtype      u8   (0 = f32, 1 = f64)
//! offset 5   ndim       u8   (1..=4)
//! offset 6   dims       ndim x u64
//! ...        data       product(dims) elements, row-major, little-endian
//! ```
//!
//! Values are held as `f64` in memory. An `f32` file is widened on load and
//! narrowed again on write, which is exact for values that came from an
//! `f32` file.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"EMB1";
const HEADER_FIXED: usize = 6;
pub const MAX_NDIM: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DType {
    F32,
    F64,
}

impl DType {
    pub fn code(self) -> u8 {
        match self {
            DType::F32 => 0,
            DType::F64 => 1,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(DType::F32),
            1 => Some(DType::F64),
            _ => None,
        }
    }

    pub fn size(self) -> usize {
        match self {
            DType::F32 => 4,
            DType::F64 => 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TensorFile {
    pub dtype: DType,
    pub shape: Vec<usize>,
    /// Row-major values.
    pub data: Vec<f64>,
}

impl TensorFile {
    /// Builds a tensor and checks the shape invariants.
    pub fn new(dtype: DType, shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let t = TensorFile { dtype, shape, data };
        t.validate()?;
        Ok(t)
    }

    pub fn from_matrix(m: &DMatrix<f64>) -> Self {
        let mut data = Vec::with_capacity(m.len());
        for row in m.row_iter() {
            data.extend(row.iter().copied());
        }
        TensorFile {
            dtype: DType::F64,
            shape: vec![m.nrows(), m.ncols()],
            data,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.shape.is_empty() || self.shape.len() > MAX_NDIM {
            return Err(Error::Format {
                offset: 5,
                message: format!("tensor must have 1-{MAX_NDIM} dimensions, got {}", self.shape.len()),
            });
        }
        let count = element_count(&self.shape).ok_or_else(|| Error::Format {
            offset: HEADER_FIXED as u64,
            message: "element count overflows".into(),
        })?;
        if count != self.data.len() {
            return Err(Error::Format {
                offset: HEADER_FIXED as u64,
                message: format!(
                    "shape {:?} implies {count} elements but data holds {}",
                    self.shape,
                    self.data.len()
                ),
            });
        }
        Ok(())
    }

    pub fn ndim(&self) -> usize {
        self.shape.len()
    }

    /// Interprets a 2-D tensor as a matrix (rows stay rows).
    pub fn to_matrix(&self) -> Result<DMatrix<f64>> {
        match self.shape.as_slice() {
            &[rows, cols] => Ok(DMatrix::from_row_slice(rows, cols, &self.data)),
            other => Err(Error::shape(format!("expected a 2-D tensor, got shape {other:?}"))),
        }
    }

    /// Splits a 3-D tensor `[k, rows, cols]` into `k` matrices.
    pub fn to_matrices(&self) -> Result<Vec<DMatrix<f64>>> {
        match self.shape.as_slice() {
            &[k, rows, cols] => Ok((0..k)
                .map(|i| {
                    let block = &self.data[i * rows * cols..(i + 1) * rows * cols];
                    DMatrix::from_row_slice(rows, cols, block)
                })
                .collect()),
            other => Err(Error::shape(format!("expected a 3-D tensor, got shape {other:?}"))),
        }
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        self.validate()?;
        let mut out = Vec::with_capacity(
            HEADER_FIXED + 8 * self.shape.len() + self.dtype.size() * self.data.len(),
        );
        out.extend_from_slice(MAGIC);
        out.push(self.dtype.code());
        out.push(self.shape.len() as u8);
        for &dim in &self.shape {
            out.extend_from_slice(&(dim as u64).to_le_bytes());
        }
        match self.dtype {
            DType::F32 => {
                for &v in &self.data {
                    out.extend_from_slice(&(v as f32).to_le_bytes());
                }
            }
            DType::F64 => {
                for &v in &self.data {
                    out.extend_from_slice(&v.to_le_bytes());
                }
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 4 || &bytes[..4] != MAGIC {
            return Err(Error::Format {
                offset: 0,
                message: "bad magic, expected EMB1".into(),
            });
        }
        if bytes.len() < HEADER_FIXED {
            return Err(Error::Format {
                offset: bytes.len() as u64,
                message: format!("truncated header: expected {HEADER_FIXED} bytes, found {}", bytes.len()),
            });
        }
        let dtype = DType::from_code(bytes[4]).ok_or_else(|| Error::Format {
            offset: 4,
            message: format!("unknown dtype code {}", bytes[4]),
        })?;
        let ndim = bytes[5] as usize;
        if ndim == 0 || ndim > MAX_NDIM {
            return Err(Error::Format {
                offset: 5,
                message: format!("ndim must be 1-{MAX_NDIM}, got {ndim}"),
            });
        }
        let dims_end = HEADER_FIXED + 8 * ndim;
        if bytes.len() < dims_end {
            return Err(Error::Format {
                offset: bytes.len() as u64,
                message: format!(
                    "truncated header: expected {dims_end} bytes for {ndim} dims, found {}",
                    bytes.len()
                ),
            });
        }
        let shape: Vec<usize> = bytes[HEADER_FIXED..dims_end]
            .chunks_exact(8)
            .map(|c| u64::from_le_bytes(c.try_into().expect("chunk of 8")) as usize)
            .collect();
        let count = element_count(&shape).ok_or_else(|| Error::Format {
            offset: HEADER_FIXED as u64,
            message: "element count overflows".into(),
        })?;
        let payload = &bytes[dims_end..];
        let expected = count.checked_mul(dtype.size()).ok_or_else(|| Error::Format {
            offset: dims_end as u64,
            message: "payload size overflows".into(),
        })?;
        if payload.len() != expected {
            let what = if payload.len() < expected { "truncated payload" } else { "trailing bytes after payload" };
            return Err(Error::Format {
                offset: dims_end as u64,
                message: format!("{what}: expected {expected} data bytes, found {}", payload.len()),
            });
        }
        let data = match dtype {
            DType::F32 => payload
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().expect("chunk of 4")) as f64)
                .collect(),
            DType::F64 => payload
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
                .collect(),
        };
        Ok(TensorFile { dtype, shape, data })
    }
}

fn element_count(shape: &[usize]) -> Option<usize> {
    shape.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d))
}

pub fn write_tensor(path: impl AsRef<Path>, t: &TensorFile) -> Result<()> {
    let path = path.as_ref();
    let bytes = t.to_bytes()?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_tensor(path: impl AsRef<Path>) -> Result<TensorFile> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    TensorFile::from_bytes(&bytes)
}

/// Token strings for the token axis of a companion tensor.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TokenSidecar {
    pub tokens: Vec<String>,
    #[serde(default)]
    pub meta: BTreeMap<String, String>,
}

impl TokenSidecar {
    pub fn new(tokens: Vec<String>) -> Self {
        TokenSidecar {
            tokens,
            meta: BTreeMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        let obj = value
            .as_object()
            .ok_or_else(|| Error::Schema("sidecar must be a JSON object".into()))?;
        let tokens = obj
            .get("tokens")
            .ok_or_else(|| Error::Schema("missing field `tokens`".into()))?
            .as_array()
            .ok_or_else(|| Error::Schema("`tokens` must be an array".into()))?
            .iter()
            .enumerate()
            .map(|(i, t)| {
                t.as_str()
                    .map(str::to_owned)
                    .ok_or_else(|| Error::Schema(format!("tokens[{i}] is not a string")))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut meta = BTreeMap::new();
        if let Some(m) = obj.get("meta") {
            let m = m
                .as_object()
                .ok_or_else(|| Error::Schema("`meta` must be an object".into()))?;
            for (k, v) in m {
                let v = v
                    .as_str()
                    .ok_or_else(|| Error::Schema(format!("meta.{k} is not a string")))?;
                meta.insert(k.clone(), v.to_owned());
            }
        }
        Ok(TokenSidecar { tokens, meta })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("sidecar serializes")
    }

    /// Checks that the sidecar covers the token axis of `t` (axis `-2` for
    /// matrices, the last axis for vectors).
    pub fn check_against(&self, t: &TensorFile) -> Result<()> {
        let axis = match t.shape.len() {
            1 => t.shape[0],
            n => t.shape[n - 2],
        };
        if axis != self.tokens.len() {
            return Err(Error::Consistency(format!(
                "sidecar has {} tokens but tensor token axis is {axis}",
                self.tokens.len()
            )));
        }
        Ok(())
    }
}

pub fn read_sidecar(path: impl AsRef<Path>) -> Result<TokenSidecar> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    TokenSidecar::from_json(&text)
}

pub fn write_sidecar(path: impl AsRef<Path>, s: &TokenSidecar) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, s.to_json()).map_err(|e| Error::io(path, e))
}
