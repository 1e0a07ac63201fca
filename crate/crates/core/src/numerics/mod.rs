//! Dense numeric kernels shared by the model and the physics code.
//!
//! Every kernel is a pure function. Dot products accumulate in `f64` and are
//! rounded to `f32` on store, so results are independent of call site and
//! thread count.

mod io;
mod ops;
mod tensor;

pub use io::{
    decode_tensor, encode_tensor, load_tensor, save_tensor, write_tensor, DTYPE_F32,
    TENSOR_MAGIC, TENSOR_VERSION,
};
pub use ops::{
    bilinear_resize, channels_first, channels_last, concat_channels, conv2d, global_avg_pool,
    leaky_relu, leaky_relu_inplace, linear, nearest_resize, softmax, softmax_into, LEAKY_SLOPE,
};
pub use tensor::Tensor;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{op}: shape mismatch between {lhs_name} {lhs:?} and {rhs_name} {rhs:?}")]
    Shape {
        op: &'static str,
        lhs_name: &'static str,
        lhs: Vec<usize>,
        rhs_name: &'static str,
        rhs: Vec<usize>,
    },
    #[error("{op}: expected rank {expected}, got extents {dims:?}")]
    Rank {
        op: &'static str,
        expected: usize,
        dims: Vec<usize>,
    },
    #[error("{op}: every entry is masked")]
    EmptySupport { op: &'static str },
    #[error("{op}: input contains a non-finite value")]
    NonFinite { op: &'static str },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("corrupt tensor data: {0}")]
    Corrupt(String),
    #[error("crc mismatch: stored {stored:#010x}, computed {computed:#010x}")]
    Crc { stored: u32, computed: u32 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
