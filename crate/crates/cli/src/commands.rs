//! Subcommand implementations, kept library-side so tests can drive them
//! without spawning the binary.

use std::path::Path;

use inceptionnext::block::MixerKind;
use inceptionnext::checksum::tensor_checksum;
use inceptionnext::complexity::{
    count_model_config, curve_csv, flops_curve, AnalyticKind, ComplexityReport,
};
use inceptionnext::error::{Error, Result};
use inceptionnext::mixer::{BandMode, BranchConfig};
use inceptionnext::model::{build_model, model_forward, preset, Model, ModelConfig, PRESET_NAMES};
use inceptionnext::rng::{seeded_random, Dist};
use inceptionnext::tensor::{Shape, Tensor};
use inceptionnext::weights::load_weights;

use crate::bench::{bench_block, BenchResult};

/// Resolve `--model`: a preset name, or a path to a ModelConfig JSON file.
pub fn resolve_model_config(arg: &str) -> Result<ModelConfig> {
    if Path::new(arg).exists() {
        let text = std::fs::read_to_string(arg)?;
        let cfg: ModelConfig = serde_json::from_str(&text)?;
        cfg.validate()?;
        return Ok(cfg);
    }
    preset(arg).map_err(|_| {
        Error::config(format!(
            "`{arg}` is neither a config file nor a preset (known presets: {})",
            PRESET_NAMES.join(", ")
        ))
    })
}

/// Parse `--k`: `7`, `3:31`, or `3:31:2` (inclusive range).
pub fn parse_krange(spec: &str) -> Result<Vec<usize>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let parse = |s: &str| -> Result<usize> {
        s.parse()
            .map_err(|_| Error::config(format!("bad kernel size `{s}` in `{spec}`")))
    };
    let ks = match parts.as_slice() {
        [one] => vec![parse(one)?],
        [a, b] => (parse(a)?..=parse(b)?).step_by(2).collect(),
        [a, b, s] => {
            let step = parse(s)?.max(1);
            (parse(a)?..=parse(b)?).step_by(step).collect()
        }
        _ => return Err(Error::config(format!("bad k range `{spec}`"))),
    };
    if ks.is_empty() {
        return Err(Error::config(format!("empty k range `{spec}`")));
    }
    Ok(ks)
}

/// `flops --curve`: emit the pinned `k,kind,flops` CSV.
pub fn cmd_flops_curve(kinds_csv: &str, kspec: &str, c: usize, hw: usize) -> Result<String> {
    let kinds: Vec<AnalyticKind> = kinds_csv
        .split(',')
        .map(|s| AnalyticKind::parse(s.trim()))
        .collect::<Result<_>>()?;
    let ks = parse_krange(kspec)?;
    let points = flops_curve(&kinds, &ks, c, hw, hw)?;
    Ok(curve_csv(&points))
}

/// `flops --model`: totals as JSON.
pub fn cmd_flops_model(model_arg: &str, input: usize) -> Result<String> {
    let cfg = resolve_model_config(model_arg)?;
    let report = count_model_config(&cfg, Shape::new(1, 3, input, input))?;
    let summary = serde_json::json!({
        "variant": report.variant,
        "input_shape": report.input_shape,
        "params": report.total_params_with_bias,
        "params_no_bias": report.total_params_no_bias,
        "macs": report.total_macs,
        "flops": report.total_flops,
    });
    Ok(serde_json::to_string_pretty(&summary)?)
}

/// `count`: the full per-layer report as JSON.
pub fn cmd_count(model_arg: &str, input: usize) -> Result<String> {
    let cfg = resolve_model_config(model_arg)?;
    let report: ComplexityReport = count_model_config(&cfg, Shape::new(1, 3, input, input))?;
    Ok(report.to_json())
}

/// `forward` output: pinned checksum plus the top-5 class indices.
#[derive(Debug, Clone)]
pub struct ForwardOut {
    pub variant: String,
    pub checksum: u64,
    pub top5: Vec<usize>,
}

impl ForwardOut {
    pub fn render(&self) -> String {
        format!(
            "model {}\nlogits_checksum {:#018x}\ntop5 {}\n",
            self.variant,
            self.checksum,
            self.top5
                .iter()
                .map(|i| i.to_string())
                .collect::<Vec<_>>()
                .join(" ")
        )
    }
}

/// Run an eval-mode forward pass on seeded weights (seed) and seeded input
/// (seed + 1), or on weights loaded from a container file.
pub fn cmd_forward(
    model_arg: &str,
    seed: u64,
    input: usize,
    batch: usize,
    weights: Option<&Path>,
) -> Result<ForwardOut> {
    let model: Model<f32> = match weights {
        Some(path) => load_weights(path)?,
        None => build_model(&resolve_model_config(model_arg)?, seed)?,
    };
    let x: Tensor<f32> = seeded_random(
        Shape::new(batch, 3, input, input),
        seed.wrapping_add(1),
        Dist::Uniform,
    );
    let logits = model_forward(&model, &x)?;
    let checksum = tensor_checksum(&logits);
    // Top-5 of the first batch item; ties break toward the lower index.
    let row: Vec<f32> = (0..logits.shape().c)
        .map(|c| logits.get(0, c, 0, 0))
        .collect();
    let mut order: Vec<usize> = (0..row.len()).collect();
    order.sort_by(|&a, &b| row[b].total_cmp(&row[a]).then(a.cmp(&b)));
    order.truncate(5);
    Ok(ForwardOut {
        variant: model.config.variant.clone(),
        checksum,
        top5: order,
    })
}

/// One ablation-grid row.
#[derive(Debug, Clone)]
pub struct AblateRow {
    pub variant: &'static str,
    pub params: u64,
    pub macs: u64,
    pub median_ns: u128,
}

pub fn ablate_csv(rows: &[AblateRow]) -> String {
    let mut s = String::from("variant,params,macs,median_ns\n");
    for r in rows {
        s.push_str(&format!(
            "{},{},{},{}\n",
            r.variant, r.params, r.macs, r.median_ns
        ));
    }
    s
}

/// The ablation grid: the baseline mixer plus every published variant.
pub fn ablation_variants() -> Vec<(&'static str, BranchConfig)> {
    let base = BranchConfig::default();
    vec![
        ("baseline", base.clone()),
        (
            "remove_horizontal_band",
            BranchConfig {
                enable_band_w: false,
                ..base.clone()
            },
        ),
        (
            "remove_vertical_band",
            BranchConfig {
                enable_band_h: false,
                ..base.clone()
            },
        ),
        (
            "remove_square",
            BranchConfig {
                enable_square: false,
                ..base.clone()
            },
        ),
        (
            "sequential_band",
            BranchConfig {
                band_mode: BandMode::Sequential,
                ..base.clone()
            },
        ),
        (
            "band_kernel_7",
            BranchConfig {
                band_kernel: 7,
                ..base.clone()
            },
        ),
        (
            "band_kernel_9",
            BranchConfig {
                band_kernel: 9,
                ..base.clone()
            },
        ),
        (
            "band_kernel_13",
            BranchConfig {
                band_kernel: 13,
                ..base.clone()
            },
        ),
        (
            "ratio_1_4",
            BranchConfig {
                branch_ratio: 0.25,
                ..base.clone()
            },
        ),
        (
            "ratio_1_16",
            BranchConfig {
                branch_ratio: 1.0 / 16.0,
                ..base
            },
        ),
    ]
}

/// Build the tiny-variant config with the mixer swapped for `cfg`.
pub fn ablation_config(cfg: &BranchConfig) -> ModelConfig {
    let mut model_cfg = preset("inceptionnext_t").expect("preset exists");
    model_cfg.mixer = MixerKind::Inception {
        config: cfg.clone(),
    };
    model_cfg
}

/// `ablate`: params/MACs per variant at the given input, plus a median
/// latency of one stage-1 block (C = dims[0] at the stem resolution) unless
/// benching is disabled.
pub fn cmd_ablate(
    input: usize,
    batch: usize,
    warmup: usize,
    iters: usize,
    bench: bool,
) -> Result<Vec<AblateRow>> {
    let mut rows = Vec::new();
    for (name, branch_cfg) in ablation_variants() {
        let cfg = ablation_config(&branch_cfg);
        let report = count_model_config(&cfg, Shape::new(1, 3, input, input))?;
        let median_ns = if bench {
            let hw = input / cfg.stem.stride;
            let result: BenchResult = bench_block(
                name,
                &cfg.mixer,
                cfg.dims[0],
                cfg.mlp_ratios[0],
                hw,
                batch,
                warmup,
                iters,
                false,
            )?;
            result.median_ns
        } else {
            0
        };
        rows.push(AblateRow {
            variant: name,
            params: report.total_params_with_bias,
            macs: report.total_macs,
            median_ns,
        });
    }
    Ok(rows)
}
