//! Motion-based spatial attention.
//!
//! Feature maps `Y (C, H, W)` from the motion model are averaged over
//! channels, passed through a softmax over all `H * W` positions and min-max
//! rescaled to `[0, 1]`. The rescaled map then gates another network's
//! features of the same spatial size, broadcast over channels and time.

use super::tensor::FeatureVolume;
use crate::error::{Error, Result};
use crate::numeric::softmax;

#[derive(Debug, Clone, PartialEq)]
pub struct SaliencyMap {
    height: usize,
    width: usize,
    alpha: Vec<f64>,
    alpha_norm: Vec<f64>,
    degenerate: bool,
}

impl SaliencyMap {
    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Softmax weights, row-major `(H, W)`.
    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    /// Min-max rescaled weights, row-major `(H, W)`.
    pub fn alpha_norm(&self) -> &[f64] {
        &self.alpha_norm
    }

    /// True when every softmax weight was equal and `alpha_norm` fell back to ones.
    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    pub fn to_volume(&self) -> FeatureVolume {
        FeatureVolume::new(vec![self.height, self.width], self.alpha_norm.clone()).expect("saliency values are finite")
    }
}

/// Mean over the leading (channel) axis; every other axis is preserved.
///
/// Channels are summed in ascending order and divided by `C` once.
pub fn channel_global_average_pool(features: &FeatureVolume) -> FeatureVolume {
    let channels = features.dims()[0];
    let rest: Vec<usize> = match &features.dims()[1..] {
        [] => vec![1],
        dims => dims.to_vec(),
    };
    let plane: usize = rest.iter().product();
    let mut sums = vec![0.0; plane];
    for channel in features.values().chunks_exact(plane) {
        for (s, v) in sums.iter_mut().zip(channel) {
            *s += v;
        }
    }
    for s in &mut sums {
        *s /= channels as f64;
    }
    FeatureVolume::new(rest, sums).expect("mean of finite values is finite")
}

/// Attention weights from a `(C, H, W)` feature map.
pub fn saliency_from_features(features: &FeatureVolume) -> Result<SaliencyMap> {
    let &[_, height, width] = features.dims() else {
        return Err(Error::DimensionMismatch(format!(
            "saliency needs (C, H, W) features, got {:?}",
            features.dims()
        )));
    };
    if let Some(v) = features.values().iter().find(|v| !v.is_finite()) {
        return Err(Error::NonFiniteInput(format!("feature value {v}")));
    }
    let pooled = channel_global_average_pool(features);
    let alpha = softmax(pooled.values());
    let (min, max) = alpha.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &a| {
        (lo.min(a), hi.max(a))
    });
    let degenerate = max == min;
    let alpha_norm = if degenerate {
        vec![1.0; alpha.len()]
    } else {
        alpha.iter().map(|&a| (a - min) / (max - min)).collect()
    };
    Ok(SaliencyMap {
        height,
        width,
        alpha,
        alpha_norm,
        degenerate,
    })
}

/// Multiplies `(C, H, W)` or `(C, T, H, W)` features by `alpha_norm`,
/// broadcasting over every leading axis.
pub fn apply_saliency(features: &FeatureVolume, map: &SaliencyMap) -> Result<FeatureVolume> {
    let dims = features.dims();
    if !(3..=4).contains(&dims.len()) || dims[dims.len() - 2..] != [map.height, map.width] {
        return Err(Error::DimensionMismatch(format!(
            "features {:?} vs saliency {}x{}",
            dims, map.height, map.width
        )));
    }
    let values = features
        .values()
        .chunks_exact(map.alpha_norm.len())
        .flat_map(|plane| plane.iter().zip(&map.alpha_norm).map(|(v, a)| v * a))
        .collect();
    FeatureVolume::new(dims.to_vec(), values)
}
