//! Model assembly: stems, downsample layers, block stacks, classifier heads,
//! and the named presets (the InceptionNeXt T/S/B family, ConvNeXt-kN
//! comparators, and the isotropic variants).
//!
//! Layout follows the 4-stage convention: a 4x4 stride-4 patchify stem with a
//! norm after the conv, a norm followed by a 2x2 stride-2 conv between
//! stages, and global average pooling into the classifier. Isotropic models
//! use a 16x16 stride-16 stem and a single stage at fixed resolution.

use serde::{Deserialize, Serialize};

use crate::block::{
    batchnorm2d, gelu, metanext_block, BlockParams, MixerKind, MixerWeights, NormMode, NormParams,
    PointwiseParams,
};
use crate::conv::{conv2d_reference, pointwise, ConvSpec};
use crate::error::{Error, Result};
use crate::mixer::BranchConfig;
use crate::rng::SplitMix64;
use crate::scalar::Scalar;
use crate::tensor::{Shape, Tensor};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StemSpec {
    pub kernel: usize,
    pub stride: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DownsampleSpec {
    pub kernel: usize,
    pub stride: usize,
}

/// Classifier head shape. `hidden_ratio: Some(r)` selects the MLP head
/// (pool -> expand by `r` -> GELU -> norm -> project); `None` the plain head
/// (pool -> norm -> project).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadSpec {
    pub hidden_ratio: Option<usize>,
}

/// Complete structural description of one model variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub variant: String,
    pub depths: Vec<usize>,
    pub dims: Vec<usize>,
    pub mlp_ratios: Vec<usize>,
    pub mixer: MixerKind,
    pub stem: StemSpec,
    pub downsample: DownsampleSpec,
    pub head: HeadSpec,
    pub num_classes: usize,
    /// Batch-norm epsilon for every norm in the model. Carried here because
    /// weight containers store norm statistics but not epsilon.
    #[serde(default = "default_norm_eps")]
    pub norm_eps: f64,
}

fn default_norm_eps() -> f64 {
    1e-5
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let stages = self.depths.len();
        if stages != 1 && stages != 4 {
            return Err(Error::config(format!(
                "expected 1 (isotropic) or 4 stages, got {stages}"
            )));
        }
        if self.dims.len() != stages || self.mlp_ratios.len() != stages {
            return Err(Error::config(
                "depths, dims, and mlp_ratios must have equal length",
            ));
        }
        if self.num_classes == 0 {
            return Err(Error::config("num_classes must be >= 1"));
        }
        if self.stem.kernel == 0 || self.stem.stride == 0 {
            return Err(Error::config("stem kernel/stride must be >= 1"));
        }
        if stages > 1 && (self.downsample.kernel == 0 || self.downsample.stride == 0) {
            return Err(Error::config("downsample kernel/stride must be >= 1"));
        }
        if self.norm_eps.is_nan() || self.norm_eps < 0.0 {
            return Err(Error::config("norm_eps must be >= 0"));
        }
        Ok(())
    }

    pub fn is_isotropic(&self) -> bool {
        self.depths.len() == 1
    }

    /// Product of all spatial reductions; inputs must be divisible by this.
    pub fn total_stride(&self) -> usize {
        let ds = if self.is_isotropic() {
            1
        } else {
            self.downsample.stride.pow((self.depths.len() - 1) as u32)
        };
        self.stem.stride * ds
    }

    /// Output shape of each stage for the given input (stride arithmetic only).
    pub fn stage_shapes(&self, input: Shape) -> Result<Vec<Shape>> {
        self.check_input(input)?;
        let mut shapes = Vec::with_capacity(self.depths.len());
        let mut h = input.h / self.stem.stride;
        let mut w = input.w / self.stem.stride;
        for (i, &dim) in self.dims.iter().enumerate() {
            if i > 0 {
                h /= self.downsample.stride;
                w /= self.downsample.stride;
            }
            shapes.push(Shape::new(input.n, dim, h, w));
        }
        Ok(shapes)
    }

    pub fn check_input(&self, input: Shape) -> Result<()> {
        let stride = self.total_stride();
        if input.h % stride != 0 || input.w % stride != 0 {
            return Err(Error::shape(format!(
                "input {}x{} not divisible by total stride {stride}",
                input.h, input.w
            )));
        }
        Ok(())
    }
}

/// Names accepted by [`preset`].
pub const PRESET_NAMES: &[&str] = &[
    "inceptionnext_t",
    "inceptionnext_s",
    "inceptionnext_b",
    "convnext_t_k3",
    "convnext_t_k5",
    "convnext_t_k7",
    "inceptionnext_iso_s",
    "inceptionnext_iso_b",
];

/// Resolve a named preset to its config.
pub fn preset(name: &str) -> Result<ModelConfig> {
    let inception = MixerKind::Inception {
        config: BranchConfig::default(),
    };
    let four_stage = |variant: &str, depths: [usize; 4], dims: [usize; 4]| ModelConfig {
        variant: variant.to_string(),
        depths: depths.to_vec(),
        dims: dims.to_vec(),
        mlp_ratios: vec![4, 4, 4, 3],
        mixer: inception.clone(),
        stem: StemSpec {
            kernel: 4,
            stride: 4,
        },
        downsample: DownsampleSpec {
            kernel: 2,
            stride: 2,
        },
        head: HeadSpec {
            hidden_ratio: Some(3),
        },
        num_classes: 1000,
        norm_eps: 1e-5,
    };
    // ConvNeXt comparators keep MLP ratio 4 everywhere and the plain head.
    let convnext = |variant: &str, kernel: usize| ModelConfig {
        mlp_ratios: vec![4, 4, 4, 4],
        mixer: MixerKind::Depthwise { kernel },
        head: HeadSpec { hidden_ratio: None },
        ..four_stage(variant, [3, 3, 9, 3], [96, 192, 384, 768])
    };
    let isotropic = |variant: &str, dim: usize| ModelConfig {
        variant: variant.to_string(),
        depths: vec![18],
        dims: vec![dim],
        mlp_ratios: vec![4],
        mixer: inception.clone(),
        stem: StemSpec {
            kernel: 16,
            stride: 16,
        },
        downsample: DownsampleSpec {
            kernel: 2,
            stride: 2,
        },
        head: HeadSpec { hidden_ratio: None },
        num_classes: 1000,
        norm_eps: 1e-5,
    };
    let cfg = match name {
        "inceptionnext_t" => four_stage("inceptionnext_t", [3, 3, 9, 3], [96, 192, 384, 768]),
        "inceptionnext_s" => four_stage("inceptionnext_s", [3, 3, 27, 3], [96, 192, 384, 768]),
        "inceptionnext_b" => four_stage("inceptionnext_b", [3, 3, 27, 3], [128, 256, 512, 1024]),
        "convnext_t_k3" => convnext("convnext_t_k3", 3),
        "convnext_t_k5" => convnext("convnext_t_k5", 5),
        "convnext_t_k7" => convnext("convnext_t_k7", 7),
        "inceptionnext_iso_s" => isotropic("inceptionnext_iso_s", 384),
        "inceptionnext_iso_b" => isotropic("inceptionnext_iso_b", 768),
        other => return Err(Error::UnknownPreset(other.to_string())),
    };
    Ok(cfg)
}

/// Patchify stem: dense conv followed by a norm.
#[derive(Debug, Clone, PartialEq)]
pub struct Stem<T: Scalar> {
    pub weight: Tensor<T>,
    pub bias: Vec<T>,
    pub norm: NormParams<T>,
}

/// Inter-stage reduction: norm followed by a strided dense conv.
#[derive(Debug, Clone, PartialEq)]
pub struct Downsample<T: Scalar> {
    pub norm: NormParams<T>,
    pub weight: Tensor<T>,
    pub bias: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stage<T: Scalar> {
    pub downsample: Option<Downsample<T>>,
    pub blocks: Vec<BlockParams<T>>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Head<T: Scalar> {
    Mlp {
        fc1: PointwiseParams<T>,
        norm: NormParams<T>,
        fc2: PointwiseParams<T>,
    },
    Plain {
        norm: NormParams<T>,
        fc: PointwiseParams<T>,
    },
}

/// A fully materialized model: config plus every weight tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Model<T: Scalar> {
    pub config: ModelConfig,
    pub stem: Stem<T>,
    pub stages: Vec<Stage<T>>,
    pub head: Head<T>,
}

fn dense_init<T: Scalar>(
    rng: &mut SplitMix64,
    out_c: usize,
    in_c: usize,
    k: usize,
) -> (Tensor<T>, Vec<T>) {
    let mut w = Tensor::zeros(Shape::new(out_c, in_c, k, k));
    for v in w.data_mut() {
        *v = T::from_f64(rng.normal_f64() * 0.02);
    }
    (w, vec![T::ZERO; out_c])
}

/// Assemble a model with deterministic seeded weights: conv/fc kernels are
/// normal(0, 0.02) draws in slot order, biases zero, norms identity,
/// LayerScale at 1e-6.
pub fn build_model<T: Scalar>(config: &ModelConfig, seed: u64) -> Result<Model<T>> {
    config.validate()?;
    let mut rng = SplitMix64::new(seed);

    let eps = config.norm_eps;
    let (stem_w, stem_b) = dense_init(&mut rng, config.dims[0], 3, config.stem.kernel);
    let stem = Stem {
        weight: stem_w,
        bias: stem_b,
        norm: NormParams::identity(config.dims[0], eps),
    };

    let mut stages = Vec::with_capacity(config.depths.len());
    for (i, (&depth, &dim)) in config.depths.iter().zip(&config.dims).enumerate() {
        let downsample = if i > 0 {
            let prev = config.dims[i - 1];
            let (w, b) = dense_init(&mut rng, dim, prev, config.downsample.kernel);
            Some(Downsample {
                norm: NormParams::identity(prev, eps),
                weight: w,
                bias: b,
            })
        } else {
            None
        };
        let mut blocks = Vec::with_capacity(depth);
        for _ in 0..depth {
            let mut block = BlockParams::init(dim, config.mlp_ratios[i], &config.mixer, &mut rng)?;
            block.norm.eps = eps;
            blocks.push(block);
        }
        stages.push(Stage { downsample, blocks });
    }

    let last = *config.dims.last().expect("validated non-empty");
    let head = match config.head.hidden_ratio {
        Some(r) => {
            let hidden = last * r;
            Head::Mlp {
                fc1: PointwiseParams::init(last, hidden, &mut rng),
                norm: NormParams::identity(hidden, eps),
                fc2: PointwiseParams::init(hidden, config.num_classes, &mut rng),
            }
        }
        None => Head::Plain {
            norm: NormParams::identity(last, eps),
            fc: PointwiseParams::init(last, config.num_classes, &mut rng),
        },
    };

    Ok(Model {
        config: config.clone(),
        stem,
        stages,
        head,
    })
}

fn stem_forward<T: Scalar>(x: &Tensor<T>, stem: &Stem<T>, spec: &StemSpec) -> Result<Tensor<T>> {
    let conv = ConvSpec::dense(3, stem.weight.shape().n, spec.kernel, spec.stride);
    let y = conv2d_reference(x, &stem.weight, Some(&stem.bias), &conv)?;
    batchnorm2d(&y, &stem.norm, NormMode::Eval)
}

fn downsample_forward<T: Scalar>(
    x: &Tensor<T>,
    ds: &Downsample<T>,
    spec: &DownsampleSpec,
) -> Result<Tensor<T>> {
    let normed = batchnorm2d(x, &ds.norm, NormMode::Eval)?;
    let conv = ConvSpec::dense(
        ds.weight.shape().c,
        ds.weight.shape().n,
        spec.kernel,
        spec.stride,
    );
    conv2d_reference(&normed, &ds.weight, Some(&ds.bias), &conv)
}

fn head_forward<T: Scalar>(x: &Tensor<T>, head: &Head<T>) -> Result<Tensor<T>> {
    let pooled = x.global_avg_pool();
    match head {
        Head::Mlp { fc1, norm, fc2 } => {
            let h = pointwise(&pooled, &fc1.weight, Some(&fc1.bias))?;
            let h = gelu(&h);
            let h = batchnorm2d(&h, norm, NormMode::Eval)?;
            pointwise(&h, &fc2.weight, Some(&fc2.bias))
        }
        Head::Plain { norm, fc } => {
            let h = batchnorm2d(&pooled, norm, NormMode::Eval)?;
            pointwise(&h, &fc.weight, Some(&fc.bias))
        }
    }
}

/// Full eval-mode forward pass; logits come back as `(N, num_classes, 1, 1)`.
pub fn model_forward<T: Scalar>(model: &Model<T>, x: &Tensor<T>) -> Result<Tensor<T>> {
    Ok(model_forward_trace(model, x)?.1)
}

/// Forward pass that also reports the output shape of every stage.
pub fn model_forward_trace<T: Scalar>(
    model: &Model<T>,
    x: &Tensor<T>,
) -> Result<(Vec<Shape>, Tensor<T>)> {
    model.config.check_input(x.shape())?;
    let mut cur = stem_forward(x, &model.stem, &model.config.stem)?;
    let mut shapes = Vec::with_capacity(model.stages.len());
    for stage in &model.stages {
        if let Some(ds) = &stage.downsample {
            cur = downsample_forward(&cur, ds, &model.config.downsample)?;
        }
        for block in &stage.blocks {
            cur = metanext_block(&cur, block, &model.config.mixer)?;
        }
        shapes.push(cur.shape());
    }
    let logits = head_forward(&cur, &model.head)?;
    Ok((shapes, logits))
}

/// Borrowed view of one named parameter slot.
pub enum SlotRef<'a, T: Scalar> {
    Tensor(&'a Tensor<T>),
    Vector(&'a [T]),
}

/// Mutable view of one named parameter slot.
pub enum SlotMut<'a, T: Scalar> {
    Tensor(&'a mut Tensor<T>),
    Vector(&'a mut [T]),
}

fn norm_slots<'a, T: Scalar>(
    out: &mut Vec<(String, SlotRef<'a, T>)>,
    prefix: &str,
    n: &'a NormParams<T>,
) {
    out.push((format!("{prefix}.weight"), SlotRef::Vector(&n.gamma)));
    out.push((format!("{prefix}.bias"), SlotRef::Vector(&n.beta)));
    out.push((format!("{prefix}.mean"), SlotRef::Vector(&n.mean)));
    out.push((format!("{prefix}.var"), SlotRef::Vector(&n.var)));
}

fn norm_slots_mut<'a, T: Scalar>(
    out: &mut Vec<(String, SlotMut<'a, T>)>,
    prefix: &str,
    n: &'a mut NormParams<T>,
) {
    let NormParams {
        mean,
        var,
        gamma,
        beta,
        ..
    } = n;
    out.push((format!("{prefix}.weight"), SlotMut::Vector(gamma)));
    out.push((format!("{prefix}.bias"), SlotMut::Vector(beta)));
    out.push((format!("{prefix}.mean"), SlotMut::Vector(mean)));
    out.push((format!("{prefix}.var"), SlotMut::Vector(var)));
}

fn pw_slots<'a, T: Scalar>(
    out: &mut Vec<(String, SlotRef<'a, T>)>,
    prefix: &str,
    p: &'a PointwiseParams<T>,
) {
    out.push((format!("{prefix}.weight"), SlotRef::Tensor(&p.weight)));
    out.push((format!("{prefix}.bias"), SlotRef::Vector(&p.bias)));
}

fn pw_slots_mut<'a, T: Scalar>(
    out: &mut Vec<(String, SlotMut<'a, T>)>,
    prefix: &str,
    p: &'a mut PointwiseParams<T>,
) {
    let PointwiseParams { weight, bias } = p;
    out.push((format!("{prefix}.weight"), SlotMut::Tensor(weight)));
    out.push((format!("{prefix}.bias"), SlotMut::Vector(bias)));
}

fn block_slots<'a, T: Scalar>(
    out: &mut Vec<(String, SlotRef<'a, T>)>,
    prefix: &str,
    b: &'a BlockParams<T>,
) {
    match &b.mixer {
        MixerWeights::Inception(m) => {
            for (name, branch) in [
                ("mixer_hw", &m.square),
                ("mixer_w", &m.band_w),
                ("mixer_h", &m.band_h),
            ] {
                if let Some(br) = branch {
                    out.push((
                        format!("{prefix}.{name}.weight"),
                        SlotRef::Tensor(&br.weight),
                    ));
                    out.push((format!("{prefix}.{name}.bias"), SlotRef::Vector(&br.bias)));
                }
            }
        }
        MixerWeights::Depthwise(br) | MixerWeights::PartialDepthwise(br) => {
            out.push((
                format!("{prefix}.mixer.weight"),
                SlotRef::Tensor(&br.weight),
            ));
            out.push((format!("{prefix}.mixer.bias"), SlotRef::Vector(&br.bias)));
        }
    }
    norm_slots(out, &format!("{prefix}.norm"), &b.norm);
    pw_slots(out, &format!("{prefix}.fc1"), &b.fc1);
    pw_slots(out, &format!("{prefix}.fc2"), &b.fc2);
    if let Some(ls) = &b.layerscale {
        out.push((format!("{prefix}.layerscale.weight"), SlotRef::Vector(ls)));
    }
}

fn block_slots_mut<'a, T: Scalar>(
    out: &mut Vec<(String, SlotMut<'a, T>)>,
    prefix: &str,
    b: &'a mut BlockParams<T>,
) {
    let BlockParams {
        mixer,
        norm,
        fc1,
        fc2,
        layerscale,
    } = b;
    match mixer {
        MixerWeights::Inception(m) => {
            for (name, branch) in [
                ("mixer_hw", &mut m.square),
                ("mixer_w", &mut m.band_w),
                ("mixer_h", &mut m.band_h),
            ] {
                if let Some(br) = branch {
                    out.push((
                        format!("{prefix}.{name}.weight"),
                        SlotMut::Tensor(&mut br.weight),
                    ));
                    out.push((
                        format!("{prefix}.{name}.bias"),
                        SlotMut::Vector(&mut br.bias),
                    ));
                }
            }
        }
        MixerWeights::Depthwise(br) | MixerWeights::PartialDepthwise(br) => {
            out.push((
                format!("{prefix}.mixer.weight"),
                SlotMut::Tensor(&mut br.weight),
            ));
            out.push((
                format!("{prefix}.mixer.bias"),
                SlotMut::Vector(&mut br.bias),
            ));
        }
    }
    norm_slots_mut(out, &format!("{prefix}.norm"), norm);
    pw_slots_mut(out, &format!("{prefix}.fc1"), fc1);
    pw_slots_mut(out, &format!("{prefix}.fc2"), fc2);
    if let Some(ls) = layerscale {
        out.push((format!("{prefix}.layerscale.weight"), SlotMut::Vector(ls)));
    }
}

impl<T: Scalar> Model<T> {
    /// Every parameter with its canonical container name, in model order.
    /// Block tensors are named
    /// `stage{i}.block{j}.{mixer_hw|mixer_w|mixer_h|mixer|norm|fc1|fc2|layerscale}.{weight|bias|mean|var}`.
    pub fn named_slots(&self) -> Vec<(String, SlotRef<'_, T>)> {
        let mut out = Vec::new();
        out.push((
            "stem.conv.weight".to_string(),
            SlotRef::Tensor(&self.stem.weight),
        ));
        out.push((
            "stem.conv.bias".to_string(),
            SlotRef::Vector(&self.stem.bias),
        ));
        norm_slots(&mut out, "stem.norm", &self.stem.norm);
        for (i, stage) in self.stages.iter().enumerate() {
            if let Some(ds) = &stage.downsample {
                let prefix = format!("downsample{i}");
                norm_slots(&mut out, &format!("{prefix}.norm"), &ds.norm);
                out.push((format!("{prefix}.conv.weight"), SlotRef::Tensor(&ds.weight)));
                out.push((format!("{prefix}.conv.bias"), SlotRef::Vector(&ds.bias)));
            }
            for (j, block) in stage.blocks.iter().enumerate() {
                block_slots(&mut out, &format!("stage{i}.block{j}"), block);
            }
        }
        match &self.head {
            Head::Mlp { fc1, norm, fc2 } => {
                pw_slots(&mut out, "head.fc1", fc1);
                norm_slots(&mut out, "head.norm", norm);
                pw_slots(&mut out, "head.fc2", fc2);
            }
            Head::Plain { norm, fc } => {
                norm_slots(&mut out, "head.norm", norm);
                pw_slots(&mut out, "head.fc", fc);
            }
        }
        out
    }

    /// Mutable twin of [`Model::named_slots`]; same names, same order.
    pub fn named_slots_mut(&mut self) -> Vec<(String, SlotMut<'_, T>)> {
        let mut out = Vec::new();
        let Model {
            stem, stages, head, ..
        } = self;
        out.push((
            "stem.conv.weight".to_string(),
            SlotMut::Tensor(&mut stem.weight),
        ));
        out.push((
            "stem.conv.bias".to_string(),
            SlotMut::Vector(&mut stem.bias),
        ));
        norm_slots_mut(&mut out, "stem.norm", &mut stem.norm);
        for (i, stage) in stages.iter_mut().enumerate() {
            if let Some(ds) = &mut stage.downsample {
                let prefix = format!("downsample{i}");
                let Downsample { norm, weight, bias } = ds;
                norm_slots_mut(&mut out, &format!("{prefix}.norm"), norm);
                out.push((format!("{prefix}.conv.weight"), SlotMut::Tensor(weight)));
                out.push((format!("{prefix}.conv.bias"), SlotMut::Vector(bias)));
            }
            for (j, block) in stage.blocks.iter_mut().enumerate() {
                block_slots_mut(&mut out, &format!("stage{i}.block{j}"), block);
            }
        }
        match head {
            Head::Mlp { fc1, norm, fc2 } => {
                pw_slots_mut(&mut out, "head.fc1", fc1);
                norm_slots_mut(&mut out, "head.norm", norm);
                pw_slots_mut(&mut out, "head.fc2", fc2);
            }
            Head::Plain { norm, fc } => {
                norm_slots_mut(&mut out, "head.norm", norm);
                pw_slots_mut(&mut out, "head.fc", fc);
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preset_tiny_matches_published_config() {
        let cfg = preset("inceptionnext_t").unwrap();
        assert_eq!(cfg.depths, vec![3, 3, 9, 3]);
        assert_eq!(cfg.dims, vec![96, 192, 384, 768]);
        assert_eq!(cfg.mlp_ratios, vec![4, 4, 4, 3]);
        assert_eq!(cfg.stem.kernel, 4);
        assert_eq!(cfg.stem.stride, 4);
        assert_eq!(cfg.total_stride(), 32);
    }

    #[test]
    fn preset_base_dims() {
        let cfg = preset("inceptionnext_b").unwrap();
        assert_eq!(cfg.dims, vec![128, 256, 512, 1024]);
        assert_eq!(cfg.depths, vec![3, 3, 27, 3]);
    }

    #[test]
    fn preset_convnext_k3_uses_depthwise_mixer() {
        let cfg = preset("convnext_t_k3").unwrap();
        assert_eq!(cfg.mixer, MixerKind::Depthwise { kernel: 3 });
        assert_eq!(cfg.mlp_ratios, vec![4, 4, 4, 4]);
        assert_eq!(cfg.head.hidden_ratio, None);
    }

    #[test]
    fn unknown_preset_is_error() {
        assert!(matches!(
            preset("resnet50"),
            Err(Error::UnknownPreset(name)) if name == "resnet50"
        ));
    }

    #[test]
    fn stage_shapes_follow_stride_arithmetic() {
        let cfg = preset("inceptionnext_t").unwrap();
        let shapes = cfg.stage_shapes(Shape::new(1, 3, 224, 224)).unwrap();
        assert_eq!(
            shapes,
            vec![
                Shape::new(1, 96, 56, 56),
                Shape::new(1, 192, 28, 28),
                Shape::new(1, 384, 14, 14),
                Shape::new(1, 768, 7, 7),
            ]
        );
    }

    #[test]
    fn indivisible_input_rejected() {
        let cfg = preset("inceptionnext_t").unwrap();
        let err = cfg.check_input(Shape::new(1, 3, 222, 222)).unwrap_err();
        assert!(err.to_string().contains("32"), "{err}");
    }

    #[test]
    fn isotropic_preset_shape() {
        let cfg = preset("inceptionnext_iso_s").unwrap();
        assert_eq!(cfg.depths, vec![18]);
        assert_eq!(cfg.dims, vec![384]);
        assert_eq!(cfg.total_stride(), 16);
        let shapes = cfg.stage_shapes(Shape::new(1, 3, 224, 224)).unwrap();
        assert_eq!(shapes, vec![Shape::new(1, 384, 14, 14)]);
    }

    #[test]
    fn build_model_is_seed_deterministic() {
        let mut cfg = preset("inceptionnext_t").unwrap();
        // Tiny stand-in so the test stays fast.
        cfg.depths = vec![1, 1, 1, 1];
        cfg.dims = vec![8, 16, 24, 32];
        let a: Model<f32> = build_model(&cfg, 7).unwrap();
        let b: Model<f32> = build_model(&cfg, 7).unwrap();
        assert_eq!(a, b);
        let c: Model<f32> = build_model(&cfg, 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn named_slot_orders_agree() {
        let mut cfg = preset("inceptionnext_t").unwrap();
        cfg.depths = vec![1, 1, 1, 1];
        cfg.dims = vec![8, 16, 24, 32];
        let mut model: Model<f32> = build_model(&cfg, 3).unwrap();
        let names: Vec<String> = model.named_slots().iter().map(|(n, _)| n.clone()).collect();
        let names_mut: Vec<String> = model
            .named_slots_mut()
            .iter()
            .map(|(n, _)| n.clone())
            .collect();
        assert_eq!(names, names_mut);
        assert!(names.contains(&"stage0.block0.mixer_hw.weight".to_string()));
        assert!(names.contains(&"stage3.block0.layerscale.weight".to_string()));
        assert!(names.contains(&"downsample1.conv.weight".to_string()));
        // No duplicate names.
        let mut sorted = names.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), names.len());
    }
}
