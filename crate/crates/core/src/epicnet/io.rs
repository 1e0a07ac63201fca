//! Weight files.
//!
//! Layout: magic `EPICWGT1`; `u32` LE length and JSON bytes of the
//! [`ModelConfig`]; `u32` LE tensor count; per tensor a `u16` LE name length,
//! the UTF-8 name and one `EPICTNSR` record; finally a `u32` LE CRC32 over all
//! preceding bytes.

use std::path::Path;

use super::{Error, ModelConfig, ModelWeights, Result};
use crate::numerics;

pub const WEIGHTS_MAGIC: &[u8; 8] = b"EPICWGT1";

pub fn encode_weights(weights: &ModelWeights) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    buf.extend_from_slice(WEIGHTS_MAGIC);
    let config = serde_json::to_vec(&weights.config).map_err(|e| Error::Corrupt(e.to_string()))?;
    buf.extend_from_slice(&(config.len() as u32).to_le_bytes());
    buf.extend_from_slice(&config);
    let tensors = weights.named_tensors();
    buf.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for (name, t) in tensors {
        buf.extend_from_slice(&(name.len() as u16).to_le_bytes());
        buf.extend_from_slice(name.as_bytes());
        buf.extend_from_slice(&numerics::encode_tensor(t));
    }
    let crc = crc32fast::hash(&buf);
    buf.extend_from_slice(&crc.to_le_bytes());
    Ok(buf)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::Corrupt(format!("truncated weight file while reading {what}")));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }
}

pub fn decode_weights(bytes: &[u8]) -> Result<ModelWeights> {
    if bytes.len() < WEIGHTS_MAGIC.len() + 4 {
        return Err(Error::Corrupt("weight file too short".into()));
    }
    if &bytes[..6] != b"EPICWG" {
        return Err(Error::Corrupt("not a weight file".into()));
    }
    if &bytes[..8] != WEIGHTS_MAGIC {
        return Err(Error::Version(String::from_utf8_lossy(&bytes[..8]).into_owned()));
    }
    let (body, tail) = bytes.split_at(bytes.len() - 4);
    let stored = u32::from_le_bytes(tail.try_into().unwrap());
    let computed = crc32fast::hash(body);
    if stored != computed {
        return Err(Error::Crc { stored, computed });
    }
    let mut cur = Cursor { bytes: body, pos: 8 };
    let config_len = cur.u32("config length")? as usize;
    let config: ModelConfig = serde_json::from_slice(cur.take(config_len, "config")?)
        .map_err(|e| Error::Corrupt(format!("config: {e}")))?;
    let mut weights = ModelWeights::zeros(&config)?;
    let expected = weights.named_tensors().len();
    let count = cur.u32("tensor count")? as usize;
    if count != expected {
        return Err(Error::Corrupt(format!("file holds {count} tensors, config implies {expected}")));
    }
    let mut seen = std::collections::HashSet::new();
    for _ in 0..count {
        let name_len = u16::from_le_bytes(cur.take(2, "name length")?.try_into().unwrap()) as usize;
        let name = std::str::from_utf8(cur.take(name_len, "name")?)
            .map_err(|_| Error::Corrupt("tensor name is not UTF-8".into()))?
            .to_owned();
        let (t, used) = numerics::decode_tensor(&body[cur.pos..]).map_err(|e| Error::Corrupt(format!("{name}: {e}")))?;
        cur.pos += used;
        let slot = weights
            .tensor_mut(&name)
            .ok_or_else(|| Error::Corrupt(format!("unknown tensor {name}")))?;
        if slot.dims() != t.dims() {
            return Err(Error::Corrupt(format!(
                "{name}: stored extents {:?}, config implies {:?}",
                t.dims(),
                slot.dims()
            )));
        }
        *slot = t;
        if !seen.insert(name.clone()) {
            return Err(Error::Corrupt(format!("duplicate tensor {name}")));
        }
    }
    if cur.pos != body.len() {
        return Err(Error::Corrupt(format!("{} unexpected bytes before checksum", body.len() - cur.pos)));
    }
    Ok(weights)
}

pub fn save_weights(weights: &ModelWeights, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, encode_weights(weights)?)?;
    Ok(())
}

pub fn load_weights(path: impl AsRef<Path>) -> Result<ModelWeights> {
    decode_weights(&std::fs::read(path)?)
}
