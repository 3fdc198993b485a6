//! Embedded-Gaussian non-local block over `(C, T, H, W)` features.
//!
//! Every output position attends to all (pooled) positions:
//!
//! ```text
//! y_i = sum_j softmax_j(theta(X_i) . phi(X_j)) g(X_j)
//! z_i = W_z y_i + X_i
//! ```
//!
//! `theta`, `phi` and `g` are 1x1x1 convolutions (plain channel-mixing
//! matrices, no bias) from `C` to `C/2` channels; `W_z` maps back to `C`.
//! The `phi` and `g` outputs are max-pooled spatially with kernel and stride
//! `pool_factor` before the pairwise step. Windows that run past the edge are
//! kept (ceil mode), so no position is dropped.

use super::tensor::FeatureVolume;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct NonLocalParams {
    theta: FeatureVolume,
    phi: FeatureVolume,
    g: FeatureVolume,
    w_z: FeatureVolume,
    pool_factor: usize,
}

impl NonLocalParams {
    /// `theta`, `phi`, `g` are `(C/2, C)`; `w_z` is `(C, C/2)`.
    pub fn new(
        theta: FeatureVolume,
        phi: FeatureVolume,
        g: FeatureVolume,
        w_z: FeatureVolume,
        pool_factor: usize,
    ) -> Result<Self> {
        let &[inner, channels] = theta.dims() else {
            return Err(Error::DimensionMismatch(format!(
                "theta must be a matrix, got {:?}",
                theta.dims()
            )));
        };
        if channels % 2 != 0 || inner * 2 != channels {
            return Err(Error::DimensionMismatch(format!(
                "theta {:?} must map C to C/2 with C even",
                theta.dims()
            )));
        }
        for (name, m) in [("phi", &phi), ("g", &g)] {
            if m.dims() != theta.dims() {
                return Err(Error::DimensionMismatch(format!(
                    "{name} {:?} differs from theta {:?}",
                    m.dims(),
                    theta.dims()
                )));
            }
        }
        if w_z.dims() != [channels, inner] {
            return Err(Error::DimensionMismatch(format!(
                "w_z {:?} must be [{channels}, {inner}]",
                w_z.dims()
            )));
        }
        if pool_factor == 0 {
            return Err(Error::InvalidConfig("pool_factor must be at least 1".into()));
        }
        Ok(Self {
            theta,
            phi,
            g,
            w_z,
            pool_factor,
        })
    }

    /// Params from the four tensors of a params file, in the order theta, phi, g, w_z.
    pub fn from_tensors(tensors: Vec<FeatureVolume>, pool_factor: usize) -> Result<Self> {
        let Ok([theta, phi, g, w_z]) = <[FeatureVolume; 4]>::try_from(tensors) else {
            return Err(Error::Malformed("params need exactly four tensors".into()));
        };
        Self::new(theta, phi, g, w_z, pool_factor)
    }

    pub fn channels(&self) -> usize {
        self.theta.dims()[1]
    }

    pub fn pool_factor(&self) -> usize {
        self.pool_factor
    }

    pub fn theta(&self) -> &FeatureVolume {
        &self.theta
    }

    pub fn phi(&self) -> &FeatureVolume {
        &self.phi
    }

    pub fn g(&self) -> &FeatureVolume {
        &self.g
    }

    pub fn w_z(&self) -> &FeatureVolume {
        &self.w_z
    }
}

/// Result of a forward pass with the intermediate attention matrix.
#[derive(Debug, Clone)]
pub struct NonLocalOutput {
    pub output: FeatureVolume,
    /// Row-major `(queries, keys)`; each row is a softmax.
    pub attention: Vec<f64>,
    pub queries: usize,
    pub keys: usize,
}

impl NonLocalOutput {
    pub fn attention_row(&self, i: usize) -> &[f64] {
        &self.attention[i * self.keys..(i + 1) * self.keys]
    }
}

pub fn non_local_block(x: &FeatureVolume, params: &NonLocalParams) -> Result<FeatureVolume> {
    non_local_block_detailed(x, params).map(|o| o.output)
}

pub fn non_local_block_detailed(x: &FeatureVolume, params: &NonLocalParams) -> Result<NonLocalOutput> {
    let (channels, frames, height, width) = match *x.dims() {
        [c, t, h, w] => (c, t, h, w),
        [c, h, w] => (c, 1, h, w),
        _ => {
            return Err(Error::DimensionMismatch(format!(
                "non-local block needs (C, T, H, W) input, got {:?}",
                x.dims()
            )))
        }
    };
    if channels != params.channels() {
        return Err(Error::DimensionMismatch(format!(
            "input has {channels} channels, params expect {}",
            params.channels()
        )));
    }
    let inner = channels / 2;
    let positions = frames * height * width;
    let input = x.values();

    let theta_x = mix_channels(params.theta.values(), inner, input, channels, positions);
    let phi_x = mix_channels(params.phi.values(), inner, input, channels, positions);
    let g_x = mix_channels(params.g.values(), inner, input, channels, positions);

    let p = params.pool_factor;
    let (phi_p, pooled_h, pooled_w) = max_pool(&phi_x, inner, frames, height, width, p);
    let (g_p, _, _) = max_pool(&g_x, inner, frames, height, width, p);
    let keys = frames * pooled_h * pooled_w;

    let mut attention = vec![0.0; positions * keys];
    let mut y = vec![0.0; inner * positions];
    for i in 0..positions {
        let row = &mut attention[i * keys..(i + 1) * keys];
        for (j, score) in row.iter_mut().enumerate() {
            *score = (0..inner)
                .map(|k| theta_x[k * positions + i] * phi_p[k * keys + j])
                .sum();
        }
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for s in row.iter_mut() {
            *s = (*s - max).exp();
            total += *s;
        }
        for s in row.iter_mut() {
            *s /= total;
        }
        for k in 0..inner {
            let gk = &g_p[k * keys..(k + 1) * keys];
            y[k * positions + i] = row.iter().zip(gk).map(|(a, g)| a * g).sum();
        }
    }

    let mut z = mix_channels(params.w_z.values(), channels, &y, inner, positions);
    for (out, residual) in z.iter_mut().zip(input) {
        *out += residual;
    }
    Ok(NonLocalOutput {
        output: FeatureVolume::new(x.dims().to_vec(), z)?,
        attention,
        queries: positions,
        keys,
    })
}

/// `out[o][p] = sum_c weights[o][c] * input[c][p]`.
fn mix_channels(weights: &[f64], out_ch: usize, input: &[f64], in_ch: usize, positions: usize) -> Vec<f64> {
    let mut out = vec![0.0; out_ch * positions];
    for (o, out_row) in out.chunks_exact_mut(positions).enumerate() {
        for c in 0..in_ch {
            let w = weights[o * in_ch + c];
            let in_row = &input[c * positions..(c + 1) * positions];
            for (acc, v) in out_row.iter_mut().zip(in_row) {
                *acc += w * v;
            }
        }
    }
    out
}

fn max_pool(
    data: &[f64],
    channels: usize,
    frames: usize,
    height: usize,
    width: usize,
    p: usize,
) -> (Vec<f64>, usize, usize) {
    if p == 1 {
        return (data.to_vec(), height, width);
    }
    let (ph, pw) = (height.div_ceil(p), width.div_ceil(p));
    let mut out = Vec::with_capacity(channels * frames * ph * pw);
    for plane in data.chunks_exact(height * width) {
        for by in 0..ph {
            for bx in 0..pw {
                let mut m = f64::NEG_INFINITY;
                for yy in by * p..((by + 1) * p).min(height) {
                    for xx in bx * p..((bx + 1) * p).min(width) {
                        m = m.max(plane[yy * width + xx]);
                    }
                }
                out.push(m);
            }
        }
    }
    (out, ph, pw)
}
