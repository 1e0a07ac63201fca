//! Wire framing.
//!
//! Layout: magic `EP`, version `u8`, kind `u8`, sample id `u64` LE, device id
//! `u16` LE, payload length `u32` LE, payload, then a CRC32 (LE) of every
//! preceding byte.

use std::io::{self, Read, Write};

use super::ProtocolError;

pub const FRAME_MAGIC: &[u8; 2] = b"EP";
pub const FRAME_VERSION: u8 = 1;
pub const HEADER_LEN: usize = 18;
/// Header plus CRC trailer.
pub const FRAME_OVERHEAD: usize = HEADER_LEN + 4;
/// Largest payload `read_frame` will allocate for.
pub const MAX_READ_PAYLOAD: usize = 1 << 28;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FrameKind {
    Latent,
    Raw,
    Control,
}

impl FrameKind {
    pub fn code(self) -> u8 {
        match self {
            Self::Latent => 0,
            Self::Raw => 1,
            Self::Control => 2,
        }
    }

    pub fn from_code(code: u8) -> Result<Self, ProtocolError> {
        match code {
            0 => Ok(Self::Latent),
            1 => Ok(Self::Raw),
            2 => Ok(Self::Control),
            other => Err(ProtocolError::Kind(other)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub kind: FrameKind,
    pub sample_id: u64,
    pub device_id: u16,
    pub payload: Vec<u8>,
}

impl Frame {
    pub fn new(kind: FrameKind, sample_id: u64, device_id: u16, payload: Vec<u8>) -> Self {
        Self { kind, sample_id, device_id, payload }
    }

    /// Encoded size in bytes.
    pub fn wire_len(&self) -> usize {
        self.payload.len() + FRAME_OVERHEAD
    }

    pub fn encode(&self) -> Result<Vec<u8>, ProtocolError> {
        encode_frame(self.kind, self.sample_id, self.device_id, &self.payload)
    }
}

fn header(kind: FrameKind, sample_id: u64, device_id: u16, len: u32) -> [u8; HEADER_LEN] {
    let mut h = [0u8; HEADER_LEN];
    h[..2].copy_from_slice(FRAME_MAGIC);
    h[2] = FRAME_VERSION;
    h[3] = kind.code();
    h[4..12].copy_from_slice(&sample_id.to_le_bytes());
    h[12..14].copy_from_slice(&device_id.to_le_bytes());
    h[14..18].copy_from_slice(&len.to_le_bytes());
    h
}

pub fn encode_frame(
    kind: FrameKind,
    sample_id: u64,
    device_id: u16,
    payload: &[u8],
) -> Result<Vec<u8>, ProtocolError> {
    let len = u32::try_from(payload.len()).map_err(|_| ProtocolError::TooLarge(payload.len()))?;
    let mut buf = Vec::with_capacity(payload.len() + FRAME_OVERHEAD);
    buf.extend_from_slice(&header(kind, sample_id, device_id, len));
    buf.extend_from_slice(payload);
    let crc = crc32fast::hash(&buf);
    buf.extend_from_slice(&crc.to_le_bytes());
    Ok(buf)
}

struct Header {
    kind: FrameKind,
    sample_id: u64,
    device_id: u16,
    len: usize,
}

fn parse_header(h: &[u8]) -> Result<Header, ProtocolError> {
    if &h[..2] != FRAME_MAGIC {
        return Err(ProtocolError::Magic([h[0], h[1]]));
    }
    if h[2] != FRAME_VERSION {
        return Err(ProtocolError::Version(h[2]));
    }
    Ok(Header {
        kind: FrameKind::from_code(h[3])?,
        sample_id: u64::from_le_bytes(h[4..12].try_into().unwrap()),
        device_id: u16::from_le_bytes(h[12..14].try_into().unwrap()),
        len: u32::from_le_bytes(h[14..18].try_into().unwrap()) as usize,
    })
}

fn check_crc(body: &[u8], trailer: &[u8]) -> Result<(), ProtocolError> {
    let stored = u32::from_le_bytes(trailer.try_into().unwrap());
    let computed = crc32fast::hash(body);
    if stored != computed {
        return Err(ProtocolError::Crc { stored, computed });
    }
    Ok(())
}

/// Decode one frame from the front of `bytes`, returning it and the bytes consumed.
pub fn decode_frame(bytes: &[u8]) -> Result<(Frame, usize), ProtocolError> {
    let truncated = |need: usize| ProtocolError::Truncated { need, have: bytes.len() };
    if bytes.len() < HEADER_LEN {
        return Err(truncated(FRAME_OVERHEAD));
    }
    let h = parse_header(&bytes[..HEADER_LEN])?;
    let total = HEADER_LEN + h.len + 4;
    if bytes.len() < total {
        return Err(truncated(total));
    }
    check_crc(&bytes[..HEADER_LEN + h.len], &bytes[HEADER_LEN + h.len..total])?;
    let frame = Frame::new(h.kind, h.sample_id, h.device_id, bytes[HEADER_LEN..HEADER_LEN + h.len].to_vec());
    Ok((frame, total))
}

pub fn write_frame(w: &mut impl Write, frame: &Frame) -> Result<(), ProtocolError> {
    w.write_all(&frame.encode()?)?;
    Ok(())
}

/// Read the next frame; `Ok(None)` on end of stream at a frame boundary.
pub fn read_frame(r: &mut impl Read) -> Result<Option<Frame>, ProtocolError> {
    let mut head = [0u8; HEADER_LEN];
    let mut filled = 0;
    while filled < HEADER_LEN {
        match r.read(&mut head[filled..]) {
            Ok(0) if filled == 0 => return Ok(None),
            Ok(0) => return Err(ProtocolError::Truncated { need: HEADER_LEN, have: filled }),
            Ok(n) => filled += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e.into()),
        }
    }
    let h = parse_header(&head)?;
    if h.len > MAX_READ_PAYLOAD {
        return Err(ProtocolError::TooLarge(h.len));
    }
    let mut rest = vec![0u8; h.len + 4];
    r.read_exact(&mut rest).map_err(|e| match e.kind() {
        io::ErrorKind::UnexpectedEof => ProtocolError::Truncated { need: HEADER_LEN + h.len + 4, have: HEADER_LEN },
        _ => e.into(),
    })?;
    let mut body = head.to_vec();
    body.extend_from_slice(&rest[..h.len]);
    check_crc(&body, &rest[h.len..])?;
    rest.truncate(h.len);
    Ok(Some(Frame::new(h.kind, h.sample_id, h.device_id, rest)))
}
