//! Dense tensor engine and multi-class U-Net with hand-written gradients.
//!
//! All math runs in 64-bit floats so that every backward pass can be checked
//! against central finite differences, and so that training is bit-identical
//! across runs for a fixed seed.

mod adam;
mod layers;
mod tensor;
mod train;
mod unet;
mod weights;

pub use adam::AdamState;
pub use layers::{
    concat_backward, concat_channels, cross_entropy_loss, relu_backward, relu_forward,
    softmax_channels, BatchNormLayer, BnCache, ConvLayer, PoolIndices, ProbMap, ProjLayer,
    UpConvLayer,
};
pub use layers::{maxpool2_backward, maxpool2_forward};
pub use tensor::Tensor4;
pub use train::{pixel_accuracy, predict_mask, train_segmenter, EpochRecord, SegTrainConfig};
pub use unet::{ForwardCache, GradSet, UNetModel, UNET_DEPTH};
pub use weights::{load_weights, save_weights};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SegNetError {
    #[error("channel mismatch: layer expects {expected}, input has {got}")]
    ChannelMismatch { expected: usize, got: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("spatial dims {h}x{w} must be even for 2x2 pooling")]
    OddDims { h: usize, w: usize },
    #[error("spatial dims {h}x{w} must be divisible by {by}")]
    IndivisibleDims { h: usize, w: usize, by: usize },
    #[error("batch statistics need at least 2 elements per channel")]
    DegenerateBatch,
    #[error("target is not one-hot at pixel {0}")]
    NotOneHot(usize),
    #[error("stale activation cache: {0}")]
    StaleCache(String),
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("weight file i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("weight file has wrong magic")]
    BadMagic,
    #[error("weight file format version {0} not supported")]
    UnsupportedVersion(u32),
    #[error("weight file corrupt: {0}")]
    Corrupt(String),
}
