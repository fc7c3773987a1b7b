//! Inception depthwise convolution.
//!
//! The token mixer splits the channels into four groups: a small square
//! depthwise kernel, a horizontal `1 x k_b` band, a vertical `k_b x 1` band,
//! and an identity passthrough that keeps the remaining channels untouched.
//! Branch outputs are concatenated back in slot order.
//!
//! Every ablation variant is a [`BranchConfig`]: branches can be disabled
//! (their channel slot falls back to identity), the band kernels can run in
//! sequence on a single group instead of in parallel, and kernel sizes and
//! the branch ratio are free parameters.

use serde::{Deserialize, Serialize};

use crate::conv::{dwconv2d, dwconv2d_backward, BranchGrads};
use crate::error::{Error, Result};
use crate::rng::SplitMix64;
use crate::scalar::Scalar;
use crate::tensor::{Shape, Tensor};

/// How the two band kernels combine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BandMode {
    /// Separate channel groups for `1 x k_b` and `k_b x 1` (the default).
    Parallel,
    /// One group gets `1 x k_b` then `k_b x 1` composed; the other band slot
    /// joins the identity group. Parameter count is unchanged.
    Sequential,
}

/// Mixer parameterization: kernel sizes, branch ratio, enabled branches, band mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchConfig {
    /// Small square kernel size (odd).
    pub square_kernel: usize,
    /// Band kernel size (odd).
    pub band_kernel: usize,
    /// Fraction of channels per convolution branch; `g = floor(C * ratio)`.
    pub branch_ratio: f64,
    /// Square `k_s x k_s` branch enabled.
    pub enable_square: bool,
    /// Horizontal `1 x k_b` band branch enabled (mixes along width).
    pub enable_band_w: bool,
    /// Vertical `k_b x 1` band branch enabled (mixes along height).
    pub enable_band_h: bool,
    pub band_mode: BandMode,
}

impl Default for BranchConfig {
    fn default() -> Self {
        Self {
            square_kernel: 3,
            band_kernel: 11,
            branch_ratio: 1.0 / 8.0,
            enable_square: true,
            enable_band_w: true,
            enable_band_h: true,
            band_mode: BandMode::Parallel,
        }
    }
}

impl BranchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.square_kernel % 2 == 0 || self.band_kernel % 2 == 0 {
            return Err(Error::config(format!(
                "kernel sizes must be odd, got square {} band {}",
                self.square_kernel, self.band_kernel
            )));
        }
        if !(0.0..=1.0).contains(&self.branch_ratio) {
            return Err(Error::config(format!(
                "branch_ratio {} outside [0, 1]",
                self.branch_ratio
            )));
        }
        Ok(())
    }

    /// Branch channel count for `channels` total.
    pub fn group_channels(&self, channels: usize) -> usize {
        (channels as f64 * self.branch_ratio) as usize
    }
}

/// Channel split `(g, g, g, C - 3g)` with `g = floor(C * ratio)`.
///
/// Disabled branches still occupy their slot (the forward pass routes those
/// channels to identity), so the arithmetic is uniform across ablations.
pub fn split_indexes(channels: usize, cfg: &BranchConfig) -> Result<[usize; 4]> {
    cfg.validate()?;
    if channels == 0 {
        return Err(Error::config("channel count must be >= 1"));
    }
    let g = cfg.group_channels(channels);
    if 3 * g > channels {
        return Err(Error::config(format!(
            "3 * g = {} exceeds {channels} channels (ratio {})",
            3 * g,
            cfg.branch_ratio
        )));
    }
    Ok([g, g, g, channels - 3 * g])
}

/// Weights for one convolution branch.
#[derive(Debug, Clone, PartialEq)]
pub struct Branch<T: Scalar> {
    /// Depthwise kernels, shape `(g, 1, kh, kw)`.
    pub weight: Tensor<T>,
    pub bias: Vec<T>,
}

/// All mixer weights. Disabled branches hold `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct MixerParams<T: Scalar> {
    pub square: Option<Branch<T>>,
    pub band_w: Option<Branch<T>>,
    pub band_h: Option<Branch<T>>,
}

impl<T: Scalar> MixerParams<T> {
    /// Fresh weights for `channels` under `cfg`: kernel entries are
    /// normal(0, 0.02) draws from `rng` in branch order (square, band_w,
    /// band_h), biases zero.
    pub fn init(channels: usize, cfg: &BranchConfig, rng: &mut SplitMix64) -> Result<Self> {
        let g = split_indexes(channels, cfg)?[0];
        let mut branch = |enabled: bool, kh: usize, kw: usize| -> Option<Branch<T>> {
            if !enabled || g == 0 {
                return None;
            }
            let shape = Shape::new(g, 1, kh, kw);
            let mut weight = Tensor::zeros(shape);
            for v in weight.data_mut() {
                *v = T::from_f64(rng.normal_f64() * 0.02);
            }
            Some(Branch {
                weight,
                bias: vec![T::ZERO; g],
            })
        };
        Ok(Self {
            square: branch(cfg.enable_square, cfg.square_kernel, cfg.square_kernel),
            band_w: branch(cfg.enable_band_w, 1, cfg.band_kernel),
            band_h: branch(cfg.enable_band_h, cfg.band_kernel, 1),
        })
    }

    fn check_branch(
        name: &str,
        branch: &Option<Branch<T>>,
        enabled: bool,
        g: usize,
        kh: usize,
        kw: usize,
    ) -> Result<()> {
        match branch {
            Some(b) => {
                if !enabled {
                    return Err(Error::config(format!(
                        "branch {name} disabled but has weights"
                    )));
                }
                let expect = Shape::new(g, 1, kh, kw);
                if b.weight.shape() != expect {
                    return Err(Error::shape(format!(
                        "branch {name} weight shape {} != expected {expect}",
                        b.weight.shape()
                    )));
                }
                if b.bias.len() != g {
                    return Err(Error::shape(format!(
                        "branch {name} bias length {} != {g}",
                        b.bias.len()
                    )));
                }
            }
            None => {
                if enabled && g > 0 {
                    return Err(Error::config(format!(
                        "branch {name} enabled but has no weights"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn validate(&self, channels: usize, cfg: &BranchConfig) -> Result<()> {
        let g = split_indexes(channels, cfg)?[0];
        let ks = cfg.square_kernel;
        let kb = cfg.band_kernel;
        Self::check_branch("square", &self.square, cfg.enable_square, g, ks, ks)?;
        Self::check_branch("band_w", &self.band_w, cfg.enable_band_w, g, 1, kb)?;
        Self::check_branch("band_h", &self.band_h, cfg.enable_band_h, g, kb, 1)?;
        Ok(())
    }
}

fn apply_branch<T: Scalar>(slice: &Tensor<T>, branch: &Option<Branch<T>>) -> Result<Tensor<T>> {
    match branch {
        Some(b) if slice.shape().c > 0 => dwconv2d(slice, &b.weight, Some(&b.bias)),
        _ => Ok(slice.clone()),
    }
}

/// Mixer forward pass; dispatches on `cfg.band_mode`.
pub fn inception_dwconv<T: Scalar>(
    x: &Tensor<T>,
    params: &MixerParams<T>,
    cfg: &BranchConfig,
) -> Result<Tensor<T>> {
    if cfg.band_mode == BandMode::Sequential {
        return inception_dwconv_sequential(x, params, cfg);
    }
    params.validate(x.shape().c, cfg)?;
    let idx = split_indexes(x.shape().c, cfg)?;
    let parts = x.split_channels(&idx)?;
    let out = [
        apply_branch(&parts[0], &params.square)?,
        apply_branch(&parts[1], &params.band_w)?,
        apply_branch(&parts[2], &params.band_h)?,
        parts[3].clone(),
    ];
    Tensor::concat_channels(&out)
}

/// Sequential-band variant: group `[g, 2g)` receives `1 x k_b` then
/// `k_b x 1` composed; group `[2g, 3g)` joins the identity mapping.
pub fn inception_dwconv_sequential<T: Scalar>(
    x: &Tensor<T>,
    params: &MixerParams<T>,
    cfg: &BranchConfig,
) -> Result<Tensor<T>> {
    if cfg.band_mode != BandMode::Sequential {
        return Err(Error::config("band_mode is not sequential"));
    }
    params.validate(x.shape().c, cfg)?;
    let idx = split_indexes(x.shape().c, cfg)?;
    let parts = x.split_channels(&idx)?;
    let band = apply_branch(&apply_branch(&parts[1], &params.band_w)?, &params.band_h)?;
    let out = [
        apply_branch(&parts[0], &params.square)?,
        band,
        parts[2].clone(),
        parts[3].clone(),
    ];
    Tensor::concat_channels(&out)
}

/// Mixer gradients; slots mirror [`MixerParams`].
#[derive(Debug, Clone)]
pub struct MixerGrads<T: Scalar> {
    pub square: Option<BranchGrads<T>>,
    pub band_w: Option<BranchGrads<T>>,
    pub band_h: Option<BranchGrads<T>>,
}

fn branch_backward<T: Scalar>(
    slice: &Tensor<T>,
    branch: &Option<Branch<T>>,
    grad_slice: &Tensor<T>,
) -> Result<(Tensor<T>, Option<BranchGrads<T>>)> {
    match branch {
        Some(b) if slice.shape().c > 0 => {
            let grads = dwconv2d_backward(slice, &b.weight, grad_slice)?;
            Ok((
                grads.grad_x,
                Some(BranchGrads {
                    weight: grads.grad_weight,
                    bias: grads.grad_bias,
                }),
            ))
        }
        _ => Ok((grad_slice.clone(), None)),
    }
}

/// Analytic backward of the mixer. Identity channels pass `grad_out` through
/// untouched; convolution branches delegate to the depthwise backward.
pub fn inception_dwconv_backward<T: Scalar>(
    x: &Tensor<T>,
    params: &MixerParams<T>,
    cfg: &BranchConfig,
    grad_out: &Tensor<T>,
) -> Result<(Tensor<T>, MixerGrads<T>)> {
    params.validate(x.shape().c, cfg)?;
    if grad_out.shape() != x.shape() {
        return Err(Error::shape(format!(
            "grad_out shape {} != input shape {}",
            grad_out.shape(),
            x.shape()
        )));
    }
    let idx = split_indexes(x.shape().c, cfg)?;
    let parts = x.split_channels(&idx)?;
    let gparts = grad_out.split_channels(&idx)?;

    let (gx_square, g_square) = branch_backward(&parts[0], &params.square, &gparts[0])?;
    let (gx_band, g_band_w, g_band_h, gx_slot2);
    match cfg.band_mode {
        BandMode::Parallel => {
            let (gx_w, gw) = branch_backward(&parts[1], &params.band_w, &gparts[1])?;
            let (gx_h, gh) = branch_backward(&parts[2], &params.band_h, &gparts[2])?;
            gx_band = gx_w;
            gx_slot2 = gx_h;
            g_band_w = gw;
            g_band_h = gh;
        }
        BandMode::Sequential => {
            // Recompute the intermediate, then chain the two backwards.
            let mid = apply_branch(&parts[1], &params.band_w)?;
            let (g_mid, gh) = branch_backward(&mid, &params.band_h, &gparts[1])?;
            let (gx_w, gw) = branch_backward(&parts[1], &params.band_w, &g_mid)?;
            gx_band = gx_w;
            gx_slot2 = gparts[2].clone();
            g_band_w = gw;
            g_band_h = gh;
        }
    }

    let grad_x = Tensor::concat_channels(&[gx_square, gx_band, gx_slot2, gparts[3].clone()])?;
    Ok((
        grad_x,
        MixerGrads {
            square: g_square,
            band_w: g_band_w,
            band_h: g_band_h,
        },
    ))
}

/// The mixer's algebraic twin: one grouped convolution whose per-channel
/// kernels are the branch kernels zero-embedded at the centre of a
/// `K x K` canvas (`K = max(k_s, k_b)`), with identity channels as centred
/// deltas. Only defined for parallel band mode.
///
/// Running [`crate::conv::conv2d_reference`] with this weight (groups = C)
/// must reproduce [`inception_dwconv`] exactly up to rounding.
pub fn equivalent_grouped_kernel<T: Scalar>(
    params: &MixerParams<T>,
    cfg: &BranchConfig,
    channels: usize,
) -> Result<(Tensor<T>, Vec<T>)> {
    if cfg.band_mode != BandMode::Parallel {
        return Err(Error::config(
            "equivalent grouped kernel is defined for parallel band mode only",
        ));
    }
    params.validate(channels, cfg)?;
    let [g, _, _, _] = split_indexes(channels, cfg)?;
    let canvas = cfg.square_kernel.max(cfg.band_kernel);
    let mut weight = Tensor::zeros(Shape::new(channels, 1, canvas, canvas));
    let mut bias = vec![T::ZERO; channels];
    let stride = canvas * canvas;

    fn put_delta<T: Scalar>(data: &mut [T], stride: usize, canvas: usize, ch: usize) {
        let centre = canvas / 2;
        data[ch * stride + centre * canvas + centre] = T::ONE;
    }
    fn put_kernel<T: Scalar>(
        data: &mut [T],
        stride: usize,
        canvas: usize,
        ch: usize,
        kernel: &Tensor<T>,
        local: usize,
    ) {
        let Shape { h: kh, w: kw, .. } = kernel.shape();
        let (oh, ow) = ((canvas - kh) / 2, (canvas - kw) / 2);
        for r in 0..kh {
            for s in 0..kw {
                data[ch * stride + (oh + r) * canvas + (ow + s)] = kernel.get(local, 0, r, s);
            }
        }
    }

    let data = weight.data_mut();
    let slots = [&params.square, &params.band_w, &params.band_h];
    for (slot_idx, branch) in slots.iter().enumerate() {
        for i in 0..g {
            let ch = slot_idx * g + i;
            match branch {
                Some(b) => {
                    put_kernel(data, stride, canvas, ch, &b.weight, i);
                    bias[ch] = b.bias[i];
                }
                None => put_delta(data, stride, canvas, ch),
            }
        }
    }
    for ch in 3 * g..channels {
        put_delta(data, stride, canvas, ch);
    }
    Ok((weight, bias))
}
