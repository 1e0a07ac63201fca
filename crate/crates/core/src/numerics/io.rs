//! `EPICTNSR` tensor records.
//!
//! Layout: 8-byte magic, version `u8` (=1), dtype `u8` (=0, f32), ndim `u8`,
//! one little-endian `u32` per extent, the little-endian `f32` payload, then a
//! little-endian CRC32 of every preceding byte of the record.

use std::io::{Read, Write};
use std::path::Path;

use super::{Error, Result, Tensor};

pub const TENSOR_MAGIC: &[u8; 8] = b"EPICTNSR";
pub const TENSOR_VERSION: u8 = 1;
pub const DTYPE_F32: u8 = 0;

pub fn encode_tensor(t: &Tensor) -> Vec<u8> {
    let mut buf = Vec::with_capacity(11 + 4 * t.ndim() + 4 * t.len() + 4);
    buf.extend_from_slice(TENSOR_MAGIC);
    buf.push(TENSOR_VERSION);
    buf.push(DTYPE_F32);
    buf.push(t.ndim() as u8);
    for &d in t.dims() {
        buf.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for &v in t.data() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    let crc = crc32fast::hash(&buf);
    buf.extend_from_slice(&crc.to_le_bytes());
    buf
}

/// Decode one record from the front of `bytes`, returning it and the bytes consumed.
pub fn decode_tensor(bytes: &[u8]) -> Result<(Tensor, usize)> {
    let need = |n: usize| -> Result<()> {
        if bytes.len() < n {
            Err(Error::Corrupt(format!(
                "truncated tensor record: need {n} bytes, have {}",
                bytes.len()
            )))
        } else {
            Ok(())
        }
    };
    need(11)?;
    if &bytes[..8] != TENSOR_MAGIC {
        return Err(Error::Corrupt("bad tensor magic".into()));
    }
    if bytes[8] != TENSOR_VERSION {
        return Err(Error::Corrupt(format!("unsupported tensor version {}", bytes[8])));
    }
    if bytes[9] != DTYPE_F32 {
        return Err(Error::Corrupt(format!("unsupported dtype code {}", bytes[9])));
    }
    let ndim = bytes[10] as usize;
    if ndim == 0 {
        return Err(Error::Corrupt("tensor record with zero dimensions".into()));
    }
    need(11 + 4 * ndim)?;
    let mut dims = Vec::with_capacity(ndim);
    for i in 0..ndim {
        let o = 11 + 4 * i;
        dims.push(u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap()) as usize);
    }
    let count = dims
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| Error::Corrupt("tensor extents overflow".into()))?;
    let header = 11 + 4 * ndim;
    let total = count
        .checked_mul(4)
        .and_then(|p| p.checked_add(header + 4))
        .ok_or_else(|| Error::Corrupt("tensor extents overflow".into()))?;
    need(total)?;
    let stored = u32::from_le_bytes(bytes[total - 4..total].try_into().unwrap());
    let computed = crc32fast::hash(&bytes[..total - 4]);
    if stored != computed {
        return Err(Error::Crc { stored, computed });
    }
    let data = bytes[header..total - 4]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let t = Tensor::new(dims, data).map_err(|e| Error::Corrupt(e.to_string()))?;
    Ok((t, total))
}

pub fn write_tensor(w: &mut impl Write, t: &Tensor) -> Result<()> {
    w.write_all(&encode_tensor(t))?;
    Ok(())
}

pub fn save_tensor(path: impl AsRef<Path>, t: &Tensor) -> Result<()> {
    std::fs::write(path, encode_tensor(t))?;
    Ok(())
}

pub fn load_tensor(path: impl AsRef<Path>) -> Result<Tensor> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    let (t, used) = decode_tensor(&bytes)?;
    if used != bytes.len() {
        return Err(Error::Corrupt(format!(
            "{} trailing bytes after tensor record",
            bytes.len() - used
        )));
    }
    Ok(t)
}
