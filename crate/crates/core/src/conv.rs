//! Convolution kernels.
//!
//! [`conv2d_reference`] is a direct 7-nested-loop convolution covering dense,
//! grouped, strided, and padded cases; it is the ground truth every
//! specialized path is tested against. The specialized paths are the stride-1
//! same-padding depthwise forward (square and band kernels), the pointwise
//! (1x1) forward, a partial-channel depthwise forward, and analytic backward
//! passes for the depthwise and pointwise ops.
//!
//! Accumulation order is fixed everywhere: kernel taps row-major (channel,
//! then kernel row, then kernel column), bias added last. Workers only ever
//! split whole output slabs, so results are identical for any thread count.

use crate::error::{Error, Result};
use crate::parallel::par_slabs;
use crate::scalar::Scalar;
use crate::tensor::{Shape, Tensor};

/// Convolution flavor, used for validation and complexity accounting.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConvKind {
    Dense,
    Depthwise,
    Pointwise,
}

/// Full convolution geometry.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConvSpec {
    pub kind: ConvKind,
    pub kernel: (usize, usize),
    pub stride: (usize, usize),
    pub padding: (usize, usize),
    pub in_channels: usize,
    pub out_channels: usize,
    pub groups: usize,
}

impl ConvSpec {
    /// Dense convolution with explicit stride; padding 0 (stem/downsample style).
    pub fn dense(in_channels: usize, out_channels: usize, kernel: usize, stride: usize) -> Self {
        Self {
            kind: ConvKind::Dense,
            kernel: (kernel, kernel),
            stride: (stride, stride),
            padding: (0, 0),
            in_channels,
            out_channels,
            groups: 1,
        }
    }

    /// Depthwise stride-1 convolution with shape-preserving `k/2` padding.
    pub fn depthwise(channels: usize, kh: usize, kw: usize) -> Self {
        Self {
            kind: ConvKind::Depthwise,
            kernel: (kh, kw),
            stride: (1, 1),
            padding: (kh / 2, kw / 2),
            in_channels: channels,
            out_channels: channels,
            groups: channels,
        }
    }

    pub fn pointwise(in_channels: usize, out_channels: usize) -> Self {
        Self {
            kind: ConvKind::Pointwise,
            kernel: (1, 1),
            stride: (1, 1),
            padding: (0, 0),
            in_channels,
            out_channels,
            groups: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.in_channels == 0 || self.out_channels == 0 {
            return Err(Error::config("channel counts must be >= 1"));
        }
        if self.kernel.0 == 0 || self.kernel.1 == 0 {
            return Err(Error::config("kernel dims must be >= 1"));
        }
        if self.stride.0 == 0 || self.stride.1 == 0 {
            return Err(Error::config("stride must be >= 1"));
        }
        if self.groups == 0
            || self.in_channels % self.groups != 0
            || self.out_channels % self.groups != 0
        {
            return Err(Error::config(format!(
                "groups {} must divide in {} and out {} channels",
                self.groups, self.in_channels, self.out_channels
            )));
        }
        match self.kind {
            ConvKind::Depthwise => {
                if self.groups != self.in_channels || self.in_channels != self.out_channels {
                    return Err(Error::config(
                        "depthwise requires groups == in_channels == out_channels",
                    ));
                }
            }
            ConvKind::Pointwise => {
                if self.kernel != (1, 1) {
                    return Err(Error::config("pointwise requires a 1x1 kernel"));
                }
            }
            ConvKind::Dense => {}
        }
        Ok(())
    }

    /// Expected weight tensor shape `(out, in/groups, kh, kw)`.
    pub fn weight_shape(&self) -> Shape {
        Shape::new(
            self.out_channels,
            self.in_channels / self.groups,
            self.kernel.0,
            self.kernel.1,
        )
    }

    /// Output shape for the given input: `floor((H + 2p - k) / s) + 1` per axis.
    pub fn out_shape(&self, input: Shape) -> Result<Shape> {
        if input.c != self.in_channels {
            return Err(Error::shape(format!(
                "input has {} channels, spec expects {}",
                input.c, self.in_channels
            )));
        }
        let oh = out_dim(input.h, self.kernel.0, self.stride.0, self.padding.0)?;
        let ow = out_dim(input.w, self.kernel.1, self.stride.1, self.padding.1)?;
        Ok(Shape::new(input.n, self.out_channels, oh, ow))
    }
}

fn out_dim(size: usize, k: usize, s: usize, p: usize) -> Result<usize> {
    let padded = size + 2 * p;
    if padded < k {
        return Err(Error::shape(format!(
            "kernel {k} larger than padded extent {padded}"
        )));
    }
    Ok((padded - k) / s + 1)
}

fn check_bias<T: Scalar>(bias: Option<&[T]>, out_channels: usize) -> Result<()> {
    if let Some(b) = bias {
        if b.len() != out_channels {
            return Err(Error::shape(format!(
                "bias length {} != out_channels {out_channels}",
                b.len()
            )));
        }
    }
    Ok(())
}

/// Direct convolution; the correctness oracle for every specialized path.
pub fn conv2d_reference<T: Scalar>(
    x: &Tensor<T>,
    weight: &Tensor<T>,
    bias: Option<&[T]>,
    spec: &ConvSpec,
) -> Result<Tensor<T>> {
    spec.validate()?;
    if weight.shape() != spec.weight_shape() {
        return Err(Error::shape(format!(
            "weight shape {} != expected {}",
            weight.shape(),
            spec.weight_shape()
        )));
    }
    check_bias(bias, spec.out_channels)?;
    let in_shape = x.shape();
    let out_shape = spec.out_shape(in_shape)?;

    let (kh, kw) = spec.kernel;
    let (sh, sw) = spec.stride;
    let (ph, pw) = spec.padding;
    let ic_per_group = spec.in_channels / spec.groups;
    let oc_per_group = spec.out_channels / spec.groups;
    let (ih_max, iw_max) = (in_shape.h, in_shape.w);

    let mut out = Tensor::zeros(out_shape);
    let slab = out_shape.h * out_shape.w;
    let xs = x.data();
    let ws = weight.data();
    par_slabs(out.data_mut(), slab, |slab_idx, out_slab| {
        let n = slab_idx / spec.out_channels;
        let oc = slab_idx % spec.out_channels;
        let g = oc / oc_per_group;
        for oh in 0..out_shape.h {
            for ow in 0..out_shape.w {
                let mut acc = T::ZERO;
                for ic in 0..ic_per_group {
                    let abs_ic = g * ic_per_group + ic;
                    let x_base = (n * spec.in_channels + abs_ic) * ih_max * iw_max;
                    let w_base = ((oc * ic_per_group + ic) * kh) * kw;
                    for r in 0..kh {
                        let ih = (oh * sh + r) as isize - ph as isize;
                        if ih < 0 || ih as usize >= ih_max {
                            continue;
                        }
                        let row = x_base + ih as usize * iw_max;
                        for s in 0..kw {
                            let iw = (ow * sw + s) as isize - pw as isize;
                            if iw < 0 || iw as usize >= iw_max {
                                continue;
                            }
                            acc += xs[row + iw as usize] * ws[w_base + r * kw + s];
                        }
                    }
                }
                if let Some(b) = bias {
                    acc += b[oc];
                }
                out_slab[oh * out_shape.w + ow] = acc;
            }
        }
    });
    Ok(out)
}

fn check_dw_weight<T: Scalar>(x: &Tensor<T>, weight: &Tensor<T>) -> Result<(usize, usize)> {
    let ws = weight.shape();
    if ws.n != x.shape().c || ws.c != 1 {
        return Err(Error::shape(format!(
            "depthwise weight shape {} does not match {} input channels",
            ws,
            x.shape().c
        )));
    }
    if ws.h % 2 == 0 || ws.w % 2 == 0 {
        return Err(Error::config(format!(
            "even kernel {}x{} rejected: same-padding depthwise needs odd sizes",
            ws.h, ws.w
        )));
    }
    Ok((ws.h, ws.w))
}

/// Stride-1 depthwise convolution with `k/2` zero padding per side.
///
/// Accepts square and band (`1 x k`, `k x 1`) kernels; spatial size is
/// preserved. Even kernel sizes are rejected.
pub fn dwconv2d<T: Scalar>(
    x: &Tensor<T>,
    weight: &Tensor<T>,
    bias: Option<&[T]>,
) -> Result<Tensor<T>> {
    let (kh, kw) = check_dw_weight(x, weight)?;
    check_bias(bias, x.shape().c)?;
    let Shape { n, c, h, w } = x.shape();
    let (ph, pw) = (kh / 2, kw / 2);

    let mut out = Tensor::zeros(x.shape());
    let slab = h * w;
    let xs = x.data();
    let ws = weight.data();
    par_slabs(out.data_mut(), slab, |slab_idx, out_slab| {
        debug_assert!(slab_idx < n * c);
        let ch = slab_idx % c;
        let x_base = slab_idx * slab;
        let w_base = ch * kh * kw;
        for oh in 0..h {
            for ow in 0..w {
                let mut acc = T::ZERO;
                for r in 0..kh {
                    let ih = (oh + r) as isize - ph as isize;
                    if ih < 0 || ih as usize >= h {
                        continue;
                    }
                    let row = x_base + ih as usize * w;
                    for s in 0..kw {
                        let iw = (ow + s) as isize - pw as isize;
                        if iw < 0 || iw as usize >= w {
                            continue;
                        }
                        acc += xs[row + iw as usize] * ws[w_base + r * kw + s];
                    }
                }
                if let Some(b) = bias {
                    acc += b[ch];
                }
                out_slab[oh * w + ow] = acc;
            }
        }
    });
    Ok(out)
}

/// Pointwise (1x1) convolution: a per-pixel matrix-vector product.
///
/// `weight` has shape `(C_out, C_in, 1, 1)`.
pub fn pointwise<T: Scalar>(
    x: &Tensor<T>,
    weight: &Tensor<T>,
    bias: Option<&[T]>,
) -> Result<Tensor<T>> {
    let ws = weight.shape();
    if ws.c != x.shape().c || ws.h != 1 || ws.w != 1 {
        return Err(Error::shape(format!(
            "pointwise weight shape {} does not match {} input channels",
            ws,
            x.shape().c
        )));
    }
    check_bias(bias, ws.n)?;
    let Shape { n, c: c_in, h, w } = x.shape();
    let c_out = ws.n;

    let mut out = Tensor::zeros(Shape::new(n, c_out, h, w));
    let slab = h * w;
    let xs = x.data();
    let wts = weight.data();
    // Channel-outer accumulation: every output element still sums its taps
    // in ascending input-channel order with the bias last, but the memory
    // walk is sequential per channel row.
    par_slabs(out.data_mut(), slab, |slab_idx, out_slab| {
        let ni = slab_idx / c_out;
        let co = slab_idx % c_out;
        let w_base = co * c_in;
        let x_base = ni * c_in * slab;
        for ci in 0..c_in {
            let wv = wts[w_base + ci];
            let row = &xs[x_base + ci * slab..x_base + (ci + 1) * slab];
            for (o, &xv) in out_slab.iter_mut().zip(row) {
                *o += xv * wv;
            }
        }
        if let Some(b) = bias {
            let bv = b[co];
            for o in out_slab.iter_mut() {
                *o += bv;
            }
        }
    });
    Ok(out)
}

/// Depthwise conv over the first `floor(C * conv_ratio)` channels; the rest
/// pass through unchanged.
pub fn partial_dwconv<T: Scalar>(
    x: &Tensor<T>,
    weight: &Tensor<T>,
    bias: Option<&[T]>,
    conv_ratio: f64,
) -> Result<Tensor<T>> {
    if !(0.0..=1.0).contains(&conv_ratio) {
        return Err(Error::config(format!(
            "conv_ratio {conv_ratio} outside [0, 1]"
        )));
    }
    let c = x.shape().c;
    let p = (c as f64 * conv_ratio) as usize;
    if weight.shape().n != p {
        return Err(Error::shape(format!(
            "weight covers {} channels, conv_ratio {conv_ratio} selects {p}",
            weight.shape().n
        )));
    }
    if p == 0 {
        return Ok(x.clone());
    }
    let parts = x.split_channels(&[p, c - p])?;
    let convolved = dwconv2d(&parts[0], weight, bias)?;
    if c == p {
        return Ok(convolved);
    }
    Tensor::concat_channels(&[convolved, parts[1].clone()])
}

/// Gradients of a conv op with respect to its input, weights, and bias.
#[derive(Debug, Clone)]
pub struct ConvGrads<T: Scalar> {
    pub grad_x: Tensor<T>,
    pub grad_weight: Tensor<T>,
    pub grad_bias: Vec<T>,
}

/// Weight/bias gradients of one parameter group (no input gradient).
#[derive(Debug, Clone)]
pub struct BranchGrads<T: Scalar> {
    pub weight: Tensor<T>,
    pub bias: Vec<T>,
}

/// Analytic backward pass of [`dwconv2d`].
pub fn dwconv2d_backward<T: Scalar>(
    x: &Tensor<T>,
    weight: &Tensor<T>,
    grad_out: &Tensor<T>,
) -> Result<ConvGrads<T>> {
    let (kh, kw) = check_dw_weight(x, weight)?;
    if grad_out.shape() != x.shape() {
        return Err(Error::shape(format!(
            "grad_out shape {} != input shape {}",
            grad_out.shape(),
            x.shape()
        )));
    }
    let Shape { n, c, h, w } = x.shape();
    let (ph, pw) = (kh / 2, kw / 2);
    let xs = x.data();
    let ws = weight.data();
    let gs = grad_out.data();

    // grad_x: correlation of grad_out with the flipped kernel.
    let mut grad_x = Tensor::zeros(x.shape());
    let slab = h * w;
    par_slabs(grad_x.data_mut(), slab, |slab_idx, gx_slab| {
        let ch = slab_idx % c;
        let g_base = slab_idx * slab;
        let w_base = ch * kh * kw;
        for ih in 0..h {
            for iw in 0..w {
                let mut acc = T::ZERO;
                for r in 0..kh {
                    let oh = (ih + ph) as isize - r as isize;
                    if oh < 0 || oh as usize >= h {
                        continue;
                    }
                    for s in 0..kw {
                        let ow = (iw + pw) as isize - s as isize;
                        if ow < 0 || ow as usize >= w {
                            continue;
                        }
                        acc += gs[g_base + oh as usize * w + ow as usize] * ws[w_base + r * kw + s];
                    }
                }
                gx_slab[ih * w + iw] = acc;
            }
        }
    });

    // grad_weight / grad_bias: fixed (n, oh, ow) accumulation order.
    let mut grad_weight = Tensor::zeros(weight.shape());
    let gw = grad_weight.data_mut();
    let mut grad_bias = vec![T::ZERO; c];
    for ni in 0..n {
        for ch in 0..c {
            let base = (ni * c + ch) * slab;
            let w_base = ch * kh * kw;
            for oh in 0..h {
                for ow in 0..w {
                    let g = gs[base + oh * w + ow];
                    grad_bias[ch] += g;
                    for r in 0..kh {
                        let ih = (oh + r) as isize - ph as isize;
                        if ih < 0 || ih as usize >= h {
                            continue;
                        }
                        for s in 0..kw {
                            let iw = (ow + s) as isize - pw as isize;
                            if iw < 0 || iw as usize >= w {
                                continue;
                            }
                            gw[w_base + r * kw + s] += g * xs[base + ih as usize * w + iw as usize];
                        }
                    }
                }
            }
        }
    }

    Ok(ConvGrads {
        grad_x,
        grad_weight,
        grad_bias,
    })
}

/// Analytic backward pass of [`pointwise`]; `grad_weight` is the per-pixel
/// outer-product sum.
pub fn pointwise_backward<T: Scalar>(
    x: &Tensor<T>,
    weight: &Tensor<T>,
    grad_out: &Tensor<T>,
) -> Result<ConvGrads<T>> {
    let ws = weight.shape();
    if ws.c != x.shape().c || ws.h != 1 || ws.w != 1 {
        return Err(Error::shape(format!(
            "pointwise weight shape {} does not match {} input channels",
            ws,
            x.shape().c
        )));
    }
    let Shape { n, c: c_in, h, w } = x.shape();
    let c_out = ws.n;
    let expected = Shape::new(n, c_out, h, w);
    if grad_out.shape() != expected {
        return Err(Error::shape(format!(
            "grad_out shape {} != expected {expected}",
            grad_out.shape()
        )));
    }
    let slab = h * w;
    let xs = x.data();
    let wts = weight.data();
    let gs = grad_out.data();

    let mut grad_x = Tensor::zeros(x.shape());
    par_slabs(grad_x.data_mut(), slab, |slab_idx, gx_slab| {
        let ni = slab_idx / c_in;
        let ci = slab_idx % c_in;
        let g_base = ni * c_out * slab;
        for co in 0..c_out {
            let wv = wts[co * c_in + ci];
            let row = &gs[g_base + co * slab..g_base + (co + 1) * slab];
            for (o, &gv) in gx_slab.iter_mut().zip(row) {
                *o += gv * wv;
            }
        }
    });

    let mut grad_weight = Tensor::zeros(ws);
    let gw = grad_weight.data_mut();
    let mut grad_bias = vec![T::ZERO; c_out];
    for ni in 0..n {
        for co in 0..c_out {
            let g_base = (ni * c_out + co) * slab;
            for p in 0..slab {
                let g = gs[g_base + p];
                grad_bias[co] += g;
                for ci in 0..c_in {
                    gw[co * c_in + ci] += g * xs[(ni * c_in + ci) * slab + p];
                }
            }
        }
    }

    Ok(ConvGrads {
        grad_x,
        grad_weight,
        grad_bias,
    })
}

/// Per-channel delta kernel (centre weight 1): the depthwise identity.
pub fn delta_weight<T: Scalar>(channels: usize, kh: usize, kw: usize) -> Tensor<T> {
    let mut w = Tensor::zeros(Shape::new(channels, 1, kh, kw));
    let centre = (kh / 2) * kw + kw / 2;
    let data = w.data_mut();
    for c in 0..channels {
        data[c * kh * kw + centre] = T::ONE;
    }
    w
}
