//! `TFZ1` checkpoint files.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic    4 bytes  "TFZ1"
//! version  u32      1 = f32 payloads, 2 = f64 payloads
//! count    u64      number of named tensors
//! repeated count times:
//!   name_len u64, name (UTF-8 bytes)
//!   rank     u64, dims (rank × u64)
//!   payload  product(dims) floats
//! ```
//!
//! Version 1 is the model-weight format. Version 2 keeps full precision and
//! is used for resumable training snapshots.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{NdError, Result};
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 4] = b"TFZ1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Precision {
    F32,
    F64,
}

impl Precision {
    fn version(self) -> u32 {
        match self {
            Precision::F32 => 1,
            Precision::F64 => 2,
        }
    }
}

pub fn encode<'a>(entries: impl IntoIterator<Item = (&'a str, &'a Tensor)>, precision: Precision) -> Vec<u8> {
    let entries: Vec<_> = entries.into_iter().collect();
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&precision.version().to_le_bytes());
    out.extend_from_slice(&(entries.len() as u64).to_le_bytes());
    for (name, t) in entries {
        out.extend_from_slice(&(name.len() as u64).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(t.shape().len() as u64).to_le_bytes());
        for &d in t.shape() {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        match precision {
            Precision::F32 => t
                .data()
                .iter()
                .for_each(|v| out.extend_from_slice(&(*v as f32).to_le_bytes())),
            Precision::F64 => t.data().iter().for_each(|v| out.extend_from_slice(&v.to_le_bytes())),
        }
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| NdError::Format(format!("truncated at byte {}", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn usize(&mut self) -> Result<usize> {
        let v = self.u64()?;
        usize::try_from(v).map_err(|_| NdError::Format(format!("length {v} overflows")))
    }
}

pub fn decode(buf: &[u8]) -> Result<Vec<(String, Tensor)>> {
    let mut r = Reader { buf, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(NdError::Format("bad magic, not a TFZ1 file".into()));
    }
    let version = u32::from_le_bytes(r.take(4)?.try_into().unwrap());
    let width = match version {
        1 => 4,
        2 => 8,
        v => return Err(NdError::Format(format!("unsupported version {v}"))),
    };
    let count = r.usize()?;
    let mut entries = Vec::new();
    for _ in 0..count {
        let name_len = r.usize()?;
        let name = std::str::from_utf8(r.take(name_len)?)
            .map_err(|e| NdError::Format(format!("parameter name is not UTF-8: {e}")))?
            .to_string();
        let rank = r.usize()?;
        if rank > 16 {
            return Err(NdError::Format(format!("{name}: implausible rank {rank}")));
        }
        let dims = (0..rank).map(|_| r.usize()).collect::<Result<Vec<_>>>()?;
        let numel = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| NdError::Format(format!("{name}: dims {dims:?} overflow")))?;
        let bytes = r.take(
            numel
                .checked_mul(width)
                .ok_or_else(|| NdError::Format("payload overflow".into()))?,
        )?;
        let data: Vec<f64> = if width == 4 {
            bytes
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
                .collect()
        } else {
            bytes
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect()
        };
        let t = Tensor::new(&dims, data).map_err(|e| NdError::Format(format!("{name}: {e}")))?;
        entries.push((name, t));
    }
    if r.pos != buf.len() {
        return Err(NdError::Format(format!("{} trailing bytes", buf.len() - r.pos)));
    }
    Ok(entries)
}

/// Writes through a temporary sibling and renames, so a failed write never
/// clobbers an existing checkpoint.
pub fn save<'a>(
    path: &Path,
    entries: impl IntoIterator<Item = (&'a str, &'a Tensor)>,
    precision: Precision,
) -> Result<()> {
    let bytes = encode(entries, precision);
    let tmp = path.with_extension("tfz.tmp");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(&bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn load(path: &Path) -> Result<Vec<(String, Tensor)>> {
    decode(&fs::read(path)?)
}
