//! Wire framing, the `<b, l, p>` link emulator and the socket transport.

mod frame;
mod link;
mod transport;

pub use frame::{
    decode_frame, encode_frame, read_frame, write_frame, Frame, FrameKind, FRAME_MAGIC,
    FRAME_OVERHEAD, FRAME_VERSION, HEADER_LEN, MAX_READ_PAYLOAD,
};
pub use link::{
    comm_reduction_report, schedule_uplinks, transmit, CommReduction, Delivery, EnergyModel, Medium,
    NetworkProfile, TransmitMode, TransmitResult, Uplink, MAX_ATTEMPTS,
};
pub use transport::{connect, FrameReader, FrameWriter};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("bad frame magic {0:02x?}")]
    Magic([u8; 2]),
    #[error("unsupported frame version {0}")]
    Version(u8),
    #[error("unknown frame kind {0}")]
    Kind(u8),
    #[error("frame crc mismatch: stored {stored:#010x}, computed {computed:#010x}")]
    Crc { stored: u32, computed: u32 },
    #[error("truncated frame: need {need} bytes, have {have}")]
    Truncated { need: usize, have: usize },
    #[error("payload of {0} bytes exceeds the frame limit")]
    TooLarge(usize),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error)]
pub enum NetemError {
    #[error("invalid network profile: {0}")]
    Profile(String),
}

pub type Result<T> = std::result::Result<T, NetemError>;
