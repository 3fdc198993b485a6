//! Feature tensors, motion-based saliency and the non-local block.

pub mod non_local;
pub mod saliency;
pub mod tensor;

pub use non_local::{non_local_block, non_local_block_detailed, NonLocalOutput, NonLocalParams};
pub use saliency::{apply_saliency, channel_global_average_pool, saliency_from_features, SaliencyMap};
pub use tensor::FeatureVolume;
