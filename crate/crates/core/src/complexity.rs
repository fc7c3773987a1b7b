//! Parameter and multiply-accumulate accounting.
//!
//! Two independent routes: closed-form costs for the three convolution
//! families (conventional, depthwise, Inception depthwise), and an exact
//! walker that visits every layer of a model config at a given input
//! resolution. For any isolated mixer/conv layer the walker's bias-free
//! parameter count must equal the closed form exactly.
//!
//! Conventions: MACs count weight-tap multiply-accumulates only (biases,
//! norms, activations, pooling, LayerScale excluded); FLOPs are `2 * MACs`
//! for conv/linear layers. Norm parameters count gamma as weight and beta as
//! bias; running statistics are not parameters.

use serde::Serialize;

use crate::block::MixerKind;
use crate::error::{Error, Result};
use crate::mixer::{split_indexes, BranchConfig};
use crate::model::{Model, ModelConfig};
use crate::scalar::Scalar;
use crate::tensor::Shape;

/// Convolution families with closed-form costs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum AnalyticKind {
    Conventional,
    Depthwise,
    Inception,
}

impl AnalyticKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "conventional" => Ok(Self::Conventional),
            "depthwise" => Ok(Self::Depthwise),
            "inception" => Ok(Self::Inception),
            other => Err(Error::config(format!("unknown conv kind `{other}`"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Conventional => "conventional",
            Self::Depthwise => "depthwise",
            Self::Inception => "inception",
        }
    }
}

/// Closed-form `(params, flops)` for one conv layer at `H x W`, bias omitted.
///
/// conventional: `k^2 C^2`, `2 k^2 C^2 H W`;
/// depthwise: `k^2 C`, `2 k^2 C H W`;
/// inception (square kernel 3, branch ratio 1/8 baked in): `(2k + 9) C / 8`,
/// `(2k + 9) C H W / 4`.
pub fn analytic_conv_cost(
    kind: AnalyticKind,
    k: usize,
    c: usize,
    h: usize,
    w: usize,
) -> Result<(u64, u64)> {
    if k == 0 || c == 0 || h == 0 || w == 0 {
        return Err(Error::config("analytic cost requires positive dimensions"));
    }
    let (k, c, h, w) = (k as u64, c as u64, h as u64, w as u64);
    let (params, flops) = match kind {
        AnalyticKind::Conventional => (k * k * c * c, 2 * k * k * c * c * h * w),
        AnalyticKind::Depthwise => (k * k * c, 2 * k * k * c * h * w),
        AnalyticKind::Inception => {
            if c % 8 != 0 {
                return Err(Error::config(format!(
                    "inception closed form assumes branch ratio 1/8; C = {c} is not divisible by 8"
                )));
            }
            let params = (2 * k + 9) * (c / 8);
            (params, 2 * params * h * w)
        }
    };
    Ok((params, flops))
}

/// One walked layer.
#[derive(Debug, Clone, Serialize)]
pub struct LayerCost {
    pub name: String,
    pub params_with_bias: u64,
    pub params_no_bias: u64,
    pub macs: u64,
    pub flops: u64,
}

/// Walker output: per-layer entries plus totals.
#[derive(Debug, Clone, Serialize)]
pub struct ComplexityReport {
    pub variant: String,
    pub input_shape: [usize; 4],
    pub layers: Vec<LayerCost>,
    pub total_params_with_bias: u64,
    pub total_params_no_bias: u64,
    pub total_macs: u64,
    pub total_flops: u64,
}

impl ComplexityReport {
    fn from_layers(variant: String, input: Shape, layers: Vec<LayerCost>) -> Self {
        let total_params_with_bias = layers.iter().map(|l| l.params_with_bias).sum();
        let total_params_no_bias = layers.iter().map(|l| l.params_no_bias).sum();
        let total_macs = layers.iter().map(|l| l.macs).sum();
        let total_flops = layers.iter().map(|l| l.flops).sum();
        Self {
            variant,
            input_shape: [input.n, input.c, input.h, input.w],
            layers,
            total_params_with_bias,
            total_params_no_bias,
            total_macs,
            total_flops,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

fn conv_cost(name: &str, taps_per_out: u64, out_c: u64, positions: u64) -> LayerCost {
    let params_no_bias = taps_per_out * out_c;
    LayerCost {
        name: name.to_string(),
        params_with_bias: params_no_bias + out_c,
        params_no_bias,
        macs: params_no_bias * positions,
        flops: 2 * params_no_bias * positions,
    }
}

fn norm_cost(name: &str, channels: u64) -> LayerCost {
    LayerCost {
        name: name.to_string(),
        params_with_bias: 2 * channels,
        params_no_bias: channels,
        macs: 0,
        flops: 0,
    }
}

fn vector_cost(name: &str, channels: u64) -> LayerCost {
    LayerCost {
        name: name.to_string(),
        params_with_bias: channels,
        params_no_bias: channels,
        macs: 0,
        flops: 0,
    }
}

/// Cost of one standalone Inception mixer layer on `channels` at `h x w`.
pub fn count_mixer_layer(
    channels: usize,
    cfg: &BranchConfig,
    h: usize,
    w: usize,
) -> Result<LayerCost> {
    let [g, _, _, _] = split_indexes(channels, cfg)?;
    let positions = (h * w) as u64;
    let g = g as u64;
    let mut weights = 0u64;
    let mut biases = 0u64;
    for (enabled, taps) in [
        (
            cfg.enable_square,
            (cfg.square_kernel * cfg.square_kernel) as u64,
        ),
        (cfg.enable_band_w, cfg.band_kernel as u64),
        (cfg.enable_band_h, cfg.band_kernel as u64),
    ] {
        if enabled && g > 0 {
            weights += taps * g;
            biases += g;
        }
    }
    Ok(LayerCost {
        name: "mixer".to_string(),
        params_with_bias: weights + biases,
        params_no_bias: weights,
        macs: weights * positions,
        flops: 2 * weights * positions,
    })
}

/// Cost of one standalone depthwise `k x k` layer on `channels` at `h x w`.
pub fn count_depthwise_layer(channels: usize, k: usize, h: usize, w: usize) -> LayerCost {
    conv_cost("mixer", (k * k) as u64, channels as u64, (h * w) as u64)
}

/// Cost of one standalone dense `k x k` convolution producing `h x w`.
pub fn count_dense_layer(c_in: usize, c_out: usize, k: usize, h: usize, w: usize) -> LayerCost {
    conv_cost("conv", (k * k * c_in) as u64, c_out as u64, (h * w) as u64)
}

fn mixer_cost(
    name: &str,
    kind: &MixerKind,
    channels: usize,
    h: usize,
    w: usize,
) -> Result<LayerCost> {
    let mut cost = match kind {
        MixerKind::Inception { config } => count_mixer_layer(channels, config, h, w)?,
        MixerKind::Depthwise { kernel } => count_depthwise_layer(channels, *kernel, h, w),
        MixerKind::PartialDepthwise { kernel, conv_ratio } => {
            let p = (channels as f64 * conv_ratio) as usize;
            count_depthwise_layer(p, *kernel, h, w)
        }
    };
    cost.name = name.to_string();
    Ok(cost)
}

/// Walk a model config at the given input, counting exact parameters and
/// MACs per layer.
pub fn count_model_config(config: &ModelConfig, input: Shape) -> Result<ComplexityReport> {
    config.validate()?;
    config.check_input(input)?;
    let n = input.n as u64;
    let mut layers = Vec::new();

    let stage_shapes = config.stage_shapes(input)?;
    let first = stage_shapes[0];
    let stem_positions = n * (first.h * first.w) as u64;
    layers.push(conv_cost(
        "stem.conv",
        (config.stem.kernel * config.stem.kernel * 3) as u64,
        config.dims[0] as u64,
        stem_positions,
    ));
    layers.push(norm_cost("stem.norm", config.dims[0] as u64));

    for (i, (&depth, &dim)) in config.depths.iter().zip(&config.dims).enumerate() {
        let Shape { h, w, .. } = stage_shapes[i];
        let positions = n * (h * w) as u64;
        if i > 0 {
            let prev = config.dims[i - 1] as u64;
            layers.push(norm_cost(&format!("downsample{i}.norm"), prev));
            layers.push(conv_cost(
                &format!("downsample{i}.conv"),
                (config.downsample.kernel * config.downsample.kernel) as u64 * prev,
                dim as u64,
                positions,
            ));
        }
        for j in 0..depth {
            let prefix = format!("stage{i}.block{j}");
            let mut mixer = mixer_cost(&format!("{prefix}.mixer"), &config.mixer, dim, h, w)?;
            mixer.macs *= n;
            mixer.flops *= n;
            layers.push(mixer);
            layers.push(norm_cost(&format!("{prefix}.norm"), dim as u64));
            let hidden = (dim * config.mlp_ratios[i]) as u64;
            layers.push(conv_cost(
                &format!("{prefix}.fc1"),
                dim as u64,
                hidden,
                positions,
            ));
            layers.push(conv_cost(
                &format!("{prefix}.fc2"),
                hidden,
                dim as u64,
                positions,
            ));
            layers.push(vector_cost(&format!("{prefix}.layerscale"), dim as u64));
        }
    }

    let last = *config.dims.last().expect("validated") as u64;
    match config.head.hidden_ratio {
        Some(r) => {
            let hidden = last * r as u64;
            layers.push(conv_cost("head.fc1", last, hidden, n));
            layers.push(norm_cost("head.norm", hidden));
            layers.push(conv_cost("head.fc2", hidden, config.num_classes as u64, n));
        }
        None => {
            layers.push(norm_cost("head.norm", last));
            layers.push(conv_cost("head.fc", last, config.num_classes as u64, n));
        }
    }

    Ok(ComplexityReport::from_layers(
        config.variant.clone(),
        input,
        layers,
    ))
}

/// Walker entry point taking a built model.
pub fn count_model<T: Scalar>(model: &Model<T>, input: Shape) -> Result<ComplexityReport> {
    count_model_config(&model.config, input)
}

/// One emitted curve point.
#[derive(Debug, Clone, Serialize)]
pub struct CurvePoint {
    pub k: usize,
    pub kind: AnalyticKind,
    pub flops: u64,
}

/// FLOPs curves over a kernel-size range for the given conv kinds.
pub fn flops_curve(
    kinds: &[AnalyticKind],
    ks: &[usize],
    c: usize,
    h: usize,
    w: usize,
) -> Result<Vec<CurvePoint>> {
    let mut out = Vec::with_capacity(kinds.len() * ks.len());
    for &kind in kinds {
        for &k in ks {
            if k % 2 == 0 {
                return Err(Error::config(format!(
                    "curve kernel sizes must be odd, got {k}"
                )));
            }
            let (_, flops) = analytic_conv_cost(kind, k, c, h, w)?;
            out.push(CurvePoint { k, kind, flops });
        }
    }
    Ok(out)
}

/// Render curve points as the pinned `k,kind,flops` CSV.
pub fn curve_csv(points: &[CurvePoint]) -> String {
    let mut s = String::from("k,kind,flops\n");
    for p in points {
        s.push_str(&format!("{},{},{}\n", p.k, p.kind.name(), p.flops));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::preset;

    #[test]
    fn analytic_reference_values() {
        assert_eq!(
            analytic_conv_cost(AnalyticKind::Depthwise, 7, 96, 56, 56).unwrap(),
            (4704, 29_503_488)
        );
        assert_eq!(
            analytic_conv_cost(AnalyticKind::Inception, 11, 96, 56, 56).unwrap(),
            (372, 2_333_184)
        );
        assert_eq!(
            analytic_conv_cost(AnalyticKind::Conventional, 1, 1, 1, 1).unwrap(),
            (1, 2)
        );
    }

    #[test]
    fn analytic_rejects_degenerate_dims() {
        assert!(analytic_conv_cost(AnalyticKind::Depthwise, 0, 4, 4, 4).is_err());
        assert!(analytic_conv_cost(AnalyticKind::Inception, 3, 12, 4, 4).is_err());
    }

    #[test]
    fn inception_to_depthwise_flops_ratio() {
        // ratio = (2k + 9) / (8 k^2)
        let hw = 56;
        let ratio = |k: usize| {
            let (_, dw) = analytic_conv_cost(AnalyticKind::Depthwise, k, 96, hw, hw).unwrap();
            let (_, inc) = analytic_conv_cost(AnalyticKind::Inception, k, 96, hw, hw).unwrap();
            inc as f64 / dw as f64
        };
        assert!((ratio(3) - 15.0 / 72.0).abs() < 1e-12);
        assert!((ratio(11) - 31.0 / 968.0).abs() < 1e-12);
        let mut prev = f64::INFINITY;
        for k in (3..=31).step_by(2) {
            let r = ratio(k);
            assert!(r < prev, "ratio not strictly decreasing at k={k}");
            prev = r;
        }
    }

    #[test]
    fn walker_matches_closed_form_for_isolated_layers() {
        for &c in &[32usize, 96] {
            for &k in &[3usize, 5, 7, 11] {
                let (dw_params, dw_flops) =
                    analytic_conv_cost(AnalyticKind::Depthwise, k, c, 56, 56).unwrap();
                let walked = count_depthwise_layer(c, k, 56, 56);
                assert_eq!(walked.params_no_bias, dw_params);
                assert_eq!(walked.flops, dw_flops);

                let cfg = BranchConfig {
                    band_kernel: k,
                    ..BranchConfig::default()
                };
                let (inc_params, inc_flops) =
                    analytic_conv_cost(AnalyticKind::Inception, k, c, 56, 56).unwrap();
                let walked = count_mixer_layer(c, &cfg, 56, 56).unwrap();
                assert_eq!(walked.params_no_bias, inc_params);
                assert_eq!(walked.flops, inc_flops);
                assert_eq!(walked.macs, inc_flops / 2);
            }
        }
    }

    #[test]
    fn report_totals_are_sums() {
        let cfg = preset("inceptionnext_t").unwrap();
        let report = count_model_config(&cfg, Shape::new(1, 3, 224, 224)).unwrap();
        let sum: u64 = report.layers.iter().map(|l| l.params_with_bias).sum();
        assert_eq!(report.total_params_with_bias, sum);
        let sum: u64 = report.layers.iter().map(|l| l.macs).sum();
        assert_eq!(report.total_macs, sum);
        for l in &report.layers {
            assert_eq!(l.flops, 2 * l.macs);
        }
    }

    fn within(actual: u64, target: f64, tol: f64) -> bool {
        let a = actual as f64;
        (a - target).abs() <= tol * target
    }

    #[test]
    fn preset_totals_match_published_columns() {
        let input = Shape::new(1, 3, 224, 224);
        let cases = [
            ("inceptionnext_t", 28.1e6, 4.2e9),
            ("inceptionnext_s", 49.0e6, 8.4e9),
            ("inceptionnext_b", 87.0e6, 14.9e9),
            ("convnext_t_k7", 28.6e6, 4.5e9),
        ];
        for (name, params, macs) in cases {
            let report = count_model_config(&preset(name).unwrap(), input).unwrap();
            assert!(
                within(report.total_params_with_bias, params, 0.03),
                "{name} params {} vs {params}",
                report.total_params_with_bias
            );
            assert!(
                within(report.total_macs, macs, 0.03),
                "{name} macs {} vs {macs}",
                report.total_macs
            );
        }
    }

    #[test]
    fn partial_channel_comparators_match_published_columns() {
        // The ConvNeXt-T family with reduced kernels and partial-channel
        // depthwise mixers: published at 28.3-28.4M params, 4.4G MACs.
        let input = Shape::new(1, 3, 224, 224);
        let k3 = count_model_config(&preset("convnext_t_k3").unwrap(), input).unwrap();
        assert!(within(k3.total_params_with_bias, 28.3e6, 0.03));
        assert!(within(k3.total_macs, 4.4e9, 0.03));
        let k5 = count_model_config(&preset("convnext_t_k5").unwrap(), input).unwrap();
        assert!(within(k5.total_params_with_bias, 28.4e6, 0.03));

        for ratio in [0.5, 0.375, 0.25, 0.125, 1.0 / 16.0] {
            let mut cfg = preset("convnext_t_k3").unwrap();
            cfg.variant = format!("convnext_t_k3_r{ratio}");
            cfg.mixer = MixerKind::PartialDepthwise {
                kernel: 3,
                conv_ratio: ratio,
            };
            let report = count_model_config(&cfg, input).unwrap();
            assert!(
                within(report.total_params_with_bias, 28.3e6, 0.03),
                "ratio {ratio}: {}",
                report.total_params_with_bias
            );
            assert!(
                within(report.total_macs, 4.4e9, 0.03),
                "ratio {ratio}: {}",
                report.total_macs
            );
        }
    }

    #[test]
    fn isotropic_totals() {
        let input = Shape::new(1, 3, 224, 224);
        let s = count_model_config(&preset("inceptionnext_iso_s").unwrap(), input).unwrap();
        assert!(within(s.total_params_with_bias, 22.0e6, 0.03));
        assert!(within(s.total_macs, 4.2e9, 0.03));
        let b = count_model_config(&preset("inceptionnext_iso_b").unwrap(), input).unwrap();
        assert!(within(b.total_params_with_bias, 86.0e6, 0.03));
        assert!(within(b.total_macs, 16.8e9, 0.03));
    }

    #[test]
    fn curve_math_is_exact_polynomials() {
        let ks: Vec<usize> = (3..=31).step_by(2).collect();
        let points = flops_curve(
            &[AnalyticKind::Depthwise, AnalyticKind::Inception],
            &ks,
            96,
            56,
            56,
        )
        .unwrap();
        let chw = 96u64 * 56 * 56;
        for p in &points {
            match p.kind {
                AnalyticKind::Depthwise => {
                    assert_eq!(p.flops, 2 * (p.k as u64).pow(2) * chw);
                }
                AnalyticKind::Inception => {
                    assert_eq!(p.flops, (2 * p.k as u64 + 9) * chw / 4);
                }
                AnalyticKind::Conventional => unreachable!(),
            }
        }
        let csv = curve_csv(&points);
        assert!(csv.starts_with("k,kind,flops\n"));
        assert_eq!(csv.lines().count(), 1 + 2 * ks.len());
    }
}
