//! Flat binary tensor files.
//!
//! A file is a sequence of one or more records, all integers little-endian:
//!
//! ```text
//! magic      4 bytes   "CS3D"
//! version    u32       1
//! dtype      u32       1 = f64
//! name_len   u32       followed by name_len bytes of UTF-8
//! rank       u32       followed by rank × u64 dims
//! n_channels u32       0, or dims[0]; each: u32 length + UTF-8 bytes
//! data       prod(dims) × f64, row-major
//! ```
//!
//! Writers also emit a JSON sidecar `<file>.json` describing every record
//! plus free-form metadata.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"CS3D";
pub const VERSION: u32 = 1;
pub const DTYPE_F64: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub name: String,
    pub dims: Vec<usize>,
    /// Names along the first axis; empty when unnamed.
    pub channels: Vec<String>,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn new(name: impl Into<String>, dims: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let t = Self {
            name: name.into(),
            dims,
            channels: Vec::new(),
            data,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn with_channels(mut self, channels: Vec<String>) -> Result<Self> {
        self.channels = channels;
        self.validate()?;
        Ok(self)
    }

    pub fn numel(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn validate(&self) -> Result<()> {
        if self.data.len() != self.numel() {
            return Err(Error::TensorFormat(format!(
                "tensor `{}` with dims {:?} needs {} values, got {}",
                self.name,
                self.dims,
                self.numel(),
                self.data.len()
            )));
        }
        if !self.channels.is_empty() && self.dims.first() != Some(&self.channels.len()) {
            return Err(Error::TensorFormat(format!(
                "tensor `{}`: {} channel names for leading dim {:?}",
                self.name,
                self.channels.len(),
                self.dims.first()
            )));
        }
        Ok(())
    }

    /// Row-major slice of leading-axis entry `i`.
    pub fn channel(&self, i: usize) -> &[f64] {
        let stride: usize = self.dims[1..].iter().product();
        &self.data[i * stride..(i + 1) * stride]
    }

    pub fn channel_index(&self, name: &str) -> Option<usize> {
        self.channels.iter().position(|c| c == name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorInfo {
    pub name: String,
    pub dims: Vec<usize>,
    pub channels: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub magic: String,
    pub version: u32,
    pub dtype: String,
    pub tensors: Vec<TensorInfo>,
    #[serde(default)]
    pub meta: serde_json::Value,
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

fn put_u32(buf: &mut Vec<u8>, v: u32) {
    buf.extend_from_slice(&v.to_le_bytes());
}

fn put_str(buf: &mut Vec<u8>, s: &str) {
    put_u32(buf, s.len() as u32);
    buf.extend_from_slice(s.as_bytes());
}

pub fn encode_tensors(tensors: &[Tensor]) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    for t in tensors {
        t.validate()?;
        buf.extend_from_slice(MAGIC);
        put_u32(&mut buf, VERSION);
        put_u32(&mut buf, DTYPE_F64);
        put_str(&mut buf, &t.name);
        put_u32(&mut buf, t.dims.len() as u32);
        for &d in &t.dims {
            buf.extend_from_slice(&(d as u64).to_le_bytes());
        }
        put_u32(&mut buf, t.channels.len() as u32);
        for c in &t.channels {
            put_str(&mut buf, c);
        }
        buf.reserve(t.data.len() * 8);
        for v in &t.data {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(buf)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|e| *e <= self.bytes.len());
        let Some(end) = end else {
            return Err(Error::TensorFormat(format!(
                "truncated record: need {n} bytes at offset {}",
                self.pos
            )));
        };
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn string(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec())
            .map_err(|e| Error::TensorFormat(format!("invalid UTF-8: {e}")))
    }
}

pub fn decode_tensors(bytes: &[u8]) -> Result<Vec<Tensor>> {
    let mut cur = Cursor { bytes, pos: 0 };
    let mut out = Vec::new();
    while cur.pos < bytes.len() {
        if cur.take(4)? != MAGIC {
            return Err(Error::TensorFormat(format!("bad magic at offset {}", cur.pos - 4)));
        }
        let version = cur.u32()?;
        if version != VERSION {
            return Err(Error::TensorFormat(format!("unsupported version {version}")));
        }
        let dtype = cur.u32()?;
        if dtype != DTYPE_F64 {
            return Err(Error::TensorFormat(format!("unsupported dtype code {dtype}")));
        }
        let name = cur.string()?;
        let rank = cur.u32()? as usize;
        let dims = (0..rank)
            .map(|_| cur.u64().map(|d| d as usize))
            .collect::<Result<Vec<_>>>()?;
        let n_channels = cur.u32()? as usize;
        let channels = (0..n_channels)
            .map(|_| cur.string())
            .collect::<Result<Vec<_>>>()?;
        let numel = dims
            .iter()
            .try_fold(1usize, |acc, d| acc.checked_mul(*d))
            .ok_or_else(|| Error::TensorFormat(format!("dims {dims:?} overflow")))?;
        let raw = cur.take(numel.checked_mul(8).ok_or_else(|| {
            Error::TensorFormat(format!("dims {dims:?} overflow"))
        })?)?;
        let data = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        let t = Tensor {
            name,
            dims,
            channels,
            data,
        };
        t.validate()?;
        out.push(t);
    }
    Ok(out)
}

/// Writes the tensors and their JSON sidecar.
pub fn write_tensors(path: &Path, tensors: &[Tensor], meta: serde_json::Value) -> Result<()> {
    let bytes = encode_tensors(tensors)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))?;
    let sidecar = Sidecar {
        magic: "CS3D".into(),
        version: VERSION,
        dtype: "f64".into(),
        tensors: tensors
            .iter()
            .map(|t| TensorInfo {
                name: t.name.clone(),
                dims: t.dims.clone(),
                channels: t.channels.clone(),
            })
            .collect(),
        meta,
    };
    let side = sidecar_path(path);
    let mut text = serde_json::to_string_pretty(&sidecar)?;
    text.push('\n');
    fs::write(&side, text).map_err(|e| Error::io(side, e))
}

pub fn read_tensors(path: &Path) -> Result<Vec<Tensor>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_tensors(&bytes)
}

/// Reads the sidecar next to `path`, if present.
pub fn read_sidecar(path: &Path) -> Result<Option<Sidecar>> {
    let side = sidecar_path(path);
    match fs::read_to_string(&side) {
        Ok(text) => Ok(Some(serde_json::from_str(&text)?)),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(Error::io(side, e)),
    }
}

pub fn find<'a>(tensors: &'a [Tensor], name: &str) -> Result<&'a Tensor> {
    tensors
        .iter()
        .find(|t| t.name == name)
        .ok_or_else(|| Error::TensorFormat(format!("missing tensor `{name}`")))
}
