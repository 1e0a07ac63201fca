//! Distributed encoders, self-attention fusion and the position-aware
//! cross-attention decoder, plus the baseline variants built from the same
//! weights.
//!
//! Latents are always handled by device id, never by arrival order, so
//! every central-side function is invariant to how a [`LatentSet`] was filled.

mod attention;
mod config;
pub mod cost;
mod io;
mod latent;
mod model;
mod weights;

pub use attention::{cross_attention, fuse, AttentionMap};
pub use config::ModelConfig;
pub use io::{decode_weights, encode_weights, load_weights, save_weights, WEIGHTS_MAGIC};
pub use latent::{assemble_receivers, slice_receivers, LatentSet, LatentVector, Partition, VelocityMap};
pub use model::{
    centralized_reconstruct, decode, decode_plain, decode_traced, encode, encode_all, fla_assemble,
    fla_device_columns, forward_full, reconstruct, sla_reconstruct,
};
pub use weights::{
    init_weights, Conv, CrossAttentionWeights, DecoderBlock, DecoderWeights, EncoderWeights,
    FusionWeights, Linear, ModelWeights,
};

use thiserror::Error;

use crate::numerics;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Numerics(#[from] numerics::Error),
    #[error("invalid model config: {0}")]
    Config(String),
    #[error("no latents present")]
    EmptySupport,
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("invalid partition: {0}")]
    Partition(String),
    #[error("corrupt weight file: {0}")]
    Corrupt(String),
    #[error("crc mismatch: stored {stored:#010x}, computed {computed:#010x}")]
    Crc { stored: u32, computed: u32 },
    #[error("unsupported weight file version {0:?}")]
    Version(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

#[cfg(test)]
mod tests;
