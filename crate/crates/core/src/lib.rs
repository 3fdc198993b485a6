//! Motion history images for gesture video.
//!
//! The pipeline reads frames from disk lazily, folds them into a
//! motion history (single channel or split into three temporal parts as
//! B, G, R), derives spatial saliency from motion features, and late-fuses
//! the logits of two classifiers. A synthetic gesture benchmark exercises the
//! whole path end to end.

pub mod attention;
pub mod bench;
pub mod error;
pub mod frame_stream;
pub mod fusion;
pub mod mhi;
pub mod numeric;
pub mod preprocess;
pub mod rgb_mhi;

pub use error::{Error, Result};
pub use frame_stream::{ColorMode, Frame, FrameStream};
pub use fusion::{fuse, sweep_fuse, FusedPrediction, FusionWeights, LogitVector};
pub use mhi::{compute_mhi, quantize_mhi, MhiAccumulator, MotionHistoryImage, Weighting};
pub use rgb_mhi::{compute_rgb_mhi, quantize_rgb_mhi, split_thirds, RgbMhiImage};
