//! Microbenchmark harness: warmup then timed iterations on seeded-random
//! input, monotonic per-iteration timestamps, median/p10/p90 reporting.
//!
//! Timings vary with the host; the computed RESULTS never do. Each run
//! records a checksum of the final iteration's output and compares it
//! against a single-shot call of the same target, so a benchmark whose
//! numbers drift is a hard error rather than a quiet lie.

use std::time::Instant;

use inceptionnext::block::{metanext_block, metanext_block_backward, BlockParams, MixerKind};
use inceptionnext::checksum::tensor_checksum;
use inceptionnext::conv::{
    dwconv2d, dwconv2d_backward, partial_dwconv, pointwise, pointwise_backward,
};
use inceptionnext::error::{Error, Result};
use inceptionnext::mixer::{
    inception_dwconv, inception_dwconv_backward, BranchConfig, MixerParams,
};
use inceptionnext::model::{build_model, model_forward, Model, ModelConfig};
use inceptionnext::rng::{seeded_random, Dist, SplitMix64};
use inceptionnext::tensor::{Shape, Tensor};

/// Minimum timed iterations for a valid result.
pub const MIN_ITERS: usize = 10;
pub const DEFAULT_WARMUP: usize = 5;
pub const DEFAULT_ITERS: usize = 30;

/// Element-count guard: inputs larger than this are rejected up front.
const MAX_INPUT_ELEMENTS: usize = 1 << 31;

/// One benchmark measurement.
#[derive(Debug, Clone)]
pub struct BenchResult {
    pub target: String,
    pub batch: usize,
    pub warmup: usize,
    pub iters: usize,
    pub times_ns: Vec<u128>,
    pub median_ns: u128,
    pub p10_ns: u128,
    pub p90_ns: u128,
    pub img_per_s: f64,
    /// Checksum of the last timed iteration's output.
    pub checksum: u64,
}

impl BenchResult {
    pub fn csv_header() -> &'static str {
        "target,batch,iters,median_ns,p10_ns,p90_ns,img_per_s"
    }

    pub fn csv_row(&self) -> String {
        // Layer specs contain commas; quote the target field per RFC 4180.
        let target = if self.target.contains(',') || self.target.contains('"') {
            format!("\"{}\"", self.target.replace('"', "\"\""))
        } else {
            self.target.clone()
        };
        format!(
            "{},{},{},{},{},{},{:.3}",
            target,
            self.batch,
            self.iters,
            self.median_ns,
            self.p10_ns,
            self.p90_ns,
            self.img_per_s
        )
    }
}

fn percentile(sorted: &[u128], q: f64) -> u128 {
    let idx = (q * (sorted.len() - 1) as f64).round() as usize;
    sorted[idx]
}

/// Run `iter` (which returns an output checksum) under the harness.
pub fn run_bench(
    target: &str,
    batch: usize,
    warmup: usize,
    iters: usize,
    mut iter: impl FnMut() -> u64,
) -> Result<BenchResult> {
    if iters < MIN_ITERS {
        return Err(Error::config(format!(
            "timed iterations must be >= {MIN_ITERS}, got {iters}"
        )));
    }
    for _ in 0..warmup {
        iter();
    }
    let mut times_ns = Vec::with_capacity(iters);
    let mut checksum = 0u64;
    for _ in 0..iters {
        let start = Instant::now();
        checksum = iter();
        times_ns.push(start.elapsed().as_nanos());
    }
    let mut sorted = times_ns.clone();
    sorted.sort_unstable();
    let median_ns = percentile(&sorted, 0.5);
    let img_per_s = batch as f64 / (median_ns as f64 * 1e-9);
    Ok(BenchResult {
        target: target.to_string(),
        batch,
        warmup,
        iters,
        p10_ns: percentile(&sorted, 0.1),
        p90_ns: percentile(&sorted, 0.9),
        median_ns,
        times_ns,
        img_per_s,
        checksum,
    })
}

/// Parsed `--layer` target.
#[derive(Debug, Clone, PartialEq)]
pub enum LayerTarget {
    Dwconv {
        k: usize,
        c: usize,
        hw: usize,
    },
    Inception {
        cfg: BranchConfig,
        c: usize,
        hw: usize,
    },
    Pointwise {
        c_in: usize,
        c_out: usize,
        hw: usize,
    },
    Partial {
        k: usize,
        c: usize,
        hw: usize,
        ratio: f64,
    },
}

/// Parse a ratio given either as a decimal (`0.125`) or a fraction (`1/8`).
pub fn parse_ratio(s: &str) -> Result<f64> {
    if let Some((num, den)) = s.split_once('/') {
        let num: f64 = num
            .trim()
            .parse()
            .map_err(|_| Error::config(format!("bad fraction `{s}`")))?;
        let den: f64 = den
            .trim()
            .parse()
            .map_err(|_| Error::config(format!("bad fraction `{s}`")))?;
        if den == 0.0 {
            return Err(Error::config("fraction denominator is zero"));
        }
        return Ok(num / den);
    }
    s.trim()
        .parse()
        .map_err(|_| Error::config(format!("bad ratio `{s}`")))
}

impl LayerTarget {
    /// Grammar: `kind:key=val,key=val,...`, e.g. `dwconv:k=11,C=96,HW=56`,
    /// `inception:kb=11,C=96,HW=56[,ks=3][,ratio=1/8]`,
    /// `pointwise:Cin=96,Cout=384,HW=56`, `partial:k=3,C=96,HW=56,ratio=1/4`.
    pub fn parse(spec: &str) -> Result<Self> {
        let (kind, rest) = spec
            .split_once(':')
            .ok_or_else(|| Error::config(format!("layer spec `{spec}` missing `kind:`")))?;
        let mut kv = std::collections::BTreeMap::new();
        for pair in rest.split(',') {
            let (key, val) = pair
                .split_once('=')
                .ok_or_else(|| Error::config(format!("bad key=value pair `{pair}`")))?;
            kv.insert(key.trim().to_string(), val.trim().to_string());
        }
        let get_usize = |key: &str| -> Result<usize> {
            kv.get(key)
                .ok_or_else(|| Error::config(format!("layer spec `{spec}` missing `{key}`")))?
                .parse()
                .map_err(|_| Error::config(format!("bad integer for `{key}` in `{spec}`")))
        };
        match kind {
            "dwconv" => Ok(Self::Dwconv {
                k: get_usize("k")?,
                c: get_usize("C")?,
                hw: get_usize("HW")?,
            }),
            "inception" => {
                let mut cfg = BranchConfig {
                    band_kernel: get_usize("kb")?,
                    ..BranchConfig::default()
                };
                if kv.contains_key("ks") {
                    cfg.square_kernel = get_usize("ks")?;
                }
                if let Some(r) = kv.get("ratio") {
                    cfg.branch_ratio = parse_ratio(r)?;
                }
                Ok(Self::Inception {
                    cfg,
                    c: get_usize("C")?,
                    hw: get_usize("HW")?,
                })
            }
            "pointwise" => Ok(Self::Pointwise {
                c_in: get_usize("Cin")?,
                c_out: get_usize("Cout")?,
                hw: get_usize("HW")?,
            }),
            "partial" => Ok(Self::Partial {
                k: get_usize("k")?,
                c: get_usize("C")?,
                hw: get_usize("HW")?,
                ratio: parse_ratio(
                    kv.get("ratio")
                        .ok_or_else(|| Error::config("partial layer needs `ratio`"))?,
                )?,
            }),
            other => Err(Error::config(format!("unknown layer kind `{other}`"))),
        }
    }
}

fn guard_size(batch: usize, c: usize, hw: usize) -> Result<()> {
    let elems = batch
        .checked_mul(c)
        .and_then(|v| v.checked_mul(hw))
        .and_then(|v| v.checked_mul(hw))
        .unwrap_or(usize::MAX);
    if elems > MAX_INPUT_ELEMENTS {
        return Err(Error::config(format!(
            "input of {elems} elements exceeds the {MAX_INPUT_ELEMENTS}-element guard"
        )));
    }
    Ok(())
}

const INPUT_SEED: u64 = 0xBEEF;
const WEIGHT_SEED: u64 = 0xFEED;

/// Benchmark one layer target; `train` additionally times the analytic
/// backward pass where one exists.
pub fn bench_layer(
    spec: &str,
    batch: usize,
    warmup: usize,
    iters: usize,
    train: bool,
) -> Result<BenchResult> {
    let target = LayerTarget::parse(spec)?;
    let result = match &target {
        LayerTarget::Dwconv { k, c, hw } => {
            guard_size(batch, *c, *hw)?;
            if k % 2 == 0 {
                return Err(Error::config(format!("even kernel {k} rejected")));
            }
            let x: Tensor<f32> =
                seeded_random(Shape::new(batch, *c, *hw, *hw), INPUT_SEED, Dist::Normal);
            let weight: Tensor<f32> =
                seeded_random(Shape::new(*c, 1, *k, *k), WEIGHT_SEED, Dist::Normal);
            let bias: Vec<f32> = vec![0.01; *c];
            let cot: Tensor<f32> = seeded_random(x.shape(), INPUT_SEED ^ 1, Dist::Normal);
            run_bench(spec, batch, warmup, iters, || {
                let y = dwconv2d(&x, &weight, Some(&bias)).expect("bench shapes are valid");
                let mut sum = tensor_checksum(&y);
                if train {
                    let g = dwconv2d_backward(&x, &weight, &cot).expect("bench shapes are valid");
                    sum ^= tensor_checksum(&g.grad_x);
                }
                sum
            })?
        }
        LayerTarget::Inception { cfg, c, hw } => {
            guard_size(batch, *c, *hw)?;
            let x: Tensor<f32> =
                seeded_random(Shape::new(batch, *c, *hw, *hw), INPUT_SEED, Dist::Normal);
            let mut rng = SplitMix64::new(WEIGHT_SEED);
            let params = MixerParams::<f32>::init(*c, cfg, &mut rng)?;
            let cot: Tensor<f32> = seeded_random(x.shape(), INPUT_SEED ^ 1, Dist::Normal);
            run_bench(spec, batch, warmup, iters, || {
                let y = inception_dwconv(&x, &params, cfg).expect("bench shapes are valid");
                let mut sum = tensor_checksum(&y);
                if train {
                    let (gx, _) = inception_dwconv_backward(&x, &params, cfg, &cot)
                        .expect("bench shapes are valid");
                    sum ^= tensor_checksum(&gx);
                }
                sum
            })?
        }
        LayerTarget::Pointwise { c_in, c_out, hw } => {
            guard_size(batch, *c_in.max(c_out), *hw)?;
            let x: Tensor<f32> =
                seeded_random(Shape::new(batch, *c_in, *hw, *hw), INPUT_SEED, Dist::Normal);
            let weight: Tensor<f32> =
                seeded_random(Shape::new(*c_out, *c_in, 1, 1), WEIGHT_SEED, Dist::Normal);
            let bias: Vec<f32> = vec![0.01; *c_out];
            let cot: Tensor<f32> = seeded_random(
                Shape::new(batch, *c_out, *hw, *hw),
                INPUT_SEED ^ 1,
                Dist::Normal,
            );
            run_bench(spec, batch, warmup, iters, || {
                let y = pointwise(&x, &weight, Some(&bias)).expect("bench shapes are valid");
                let mut sum = tensor_checksum(&y);
                if train {
                    let g = pointwise_backward(&x, &weight, &cot).expect("bench shapes are valid");
                    sum ^= tensor_checksum(&g.grad_x);
                }
                sum
            })?
        }
        LayerTarget::Partial { k, c, hw, ratio } => {
            if train {
                return Err(Error::config(
                    "train-like timing is not available for `partial` (no standalone backward)",
                ));
            }
            guard_size(batch, *c, *hw)?;
            let p = (*c as f64 * ratio) as usize;
            let x: Tensor<f32> =
                seeded_random(Shape::new(batch, *c, *hw, *hw), INPUT_SEED, Dist::Normal);
            let weight: Tensor<f32> =
                seeded_random(Shape::new(p, 1, *k, *k), WEIGHT_SEED, Dist::Normal);
            let bias: Vec<f32> = vec![0.01; p];
            run_bench(spec, batch, warmup, iters, || {
                let y = partial_dwconv(&x, &weight, Some(&bias), *ratio)
                    .expect("bench shapes are valid");
                tensor_checksum(&y)
            })?
        }
    };
    verify_result_determinism(&target, batch, train, &result)?;
    Ok(result)
}

/// The outputs computed inside the timed loop must equal a single-shot call.
fn verify_result_determinism(
    target: &LayerTarget,
    batch: usize,
    train: bool,
    result: &BenchResult,
) -> Result<()> {
    let single = match target {
        LayerTarget::Dwconv { k, c, hw } => {
            let x: Tensor<f32> =
                seeded_random(Shape::new(batch, *c, *hw, *hw), INPUT_SEED, Dist::Normal);
            let weight: Tensor<f32> =
                seeded_random(Shape::new(*c, 1, *k, *k), WEIGHT_SEED, Dist::Normal);
            let bias: Vec<f32> = vec![0.01; *c];
            let y = dwconv2d(&x, &weight, Some(&bias))?;
            let mut sum = tensor_checksum(&y);
            if train {
                let cot: Tensor<f32> = seeded_random(x.shape(), INPUT_SEED ^ 1, Dist::Normal);
                let g = dwconv2d_backward(&x, &weight, &cot)?;
                sum ^= tensor_checksum(&g.grad_x);
            }
            sum
        }
        LayerTarget::Inception { cfg, c, hw } => {
            let x: Tensor<f32> =
                seeded_random(Shape::new(batch, *c, *hw, *hw), INPUT_SEED, Dist::Normal);
            let mut rng = SplitMix64::new(WEIGHT_SEED);
            let params = MixerParams::<f32>::init(*c, cfg, &mut rng)?;
            let y = inception_dwconv(&x, &params, cfg)?;
            let mut sum = tensor_checksum(&y);
            if train {
                let cot: Tensor<f32> = seeded_random(x.shape(), INPUT_SEED ^ 1, Dist::Normal);
                let (gx, _) = inception_dwconv_backward(&x, &params, cfg, &cot)?;
                sum ^= tensor_checksum(&gx);
            }
            sum
        }
        LayerTarget::Pointwise { c_in, c_out, hw } => {
            let x: Tensor<f32> =
                seeded_random(Shape::new(batch, *c_in, *hw, *hw), INPUT_SEED, Dist::Normal);
            let weight: Tensor<f32> =
                seeded_random(Shape::new(*c_out, *c_in, 1, 1), WEIGHT_SEED, Dist::Normal);
            let bias: Vec<f32> = vec![0.01; *c_out];
            let y = pointwise(&x, &weight, Some(&bias))?;
            let mut sum = tensor_checksum(&y);
            if train {
                let cot: Tensor<f32> = seeded_random(
                    Shape::new(batch, *c_out, *hw, *hw),
                    INPUT_SEED ^ 1,
                    Dist::Normal,
                );
                let g = pointwise_backward(&x, &weight, &cot)?;
                sum ^= tensor_checksum(&g.grad_x);
            }
            sum
        }
        LayerTarget::Partial { k, c, hw, ratio } => {
            let p = (*c as f64 * ratio) as usize;
            let x: Tensor<f32> =
                seeded_random(Shape::new(batch, *c, *hw, *hw), INPUT_SEED, Dist::Normal);
            let weight: Tensor<f32> =
                seeded_random(Shape::new(p, 1, *k, *k), WEIGHT_SEED, Dist::Normal);
            let bias: Vec<f32> = vec![0.01; p];
            tensor_checksum(&partial_dwconv(&x, &weight, Some(&bias), *ratio)?)
        }
    };
    if single != result.checksum {
        return Err(Error::config(format!(
            "benchmark outputs drifted: timed-loop checksum {:#018x} != single-shot {single:#018x}",
            result.checksum
        )));
    }
    Ok(())
}

/// Benchmark an eval-mode model forward pass.
pub fn bench_model(
    name: &str,
    config: &ModelConfig,
    batch: usize,
    input: usize,
    warmup: usize,
    iters: usize,
) -> Result<BenchResult> {
    guard_size(batch, 3, input)?;
    let model: Model<f32> = build_model(config, WEIGHT_SEED)?;
    let x: Tensor<f32> =
        seeded_random(Shape::new(batch, 3, input, input), INPUT_SEED, Dist::Normal);
    model.config.check_input(x.shape())?;
    let result = run_bench(name, batch, warmup, iters, || {
        tensor_checksum(&model_forward(&model, &x).expect("bench shapes are valid"))
    })?;
    let single = tensor_checksum(&model_forward(&model, &x)?);
    if single != result.checksum {
        return Err(Error::config("benchmark outputs drifted"));
    }
    Ok(result)
}

/// Benchmark one MetaNeXt block forward (or forward+backward) at a given
/// width; used by the ablation driver's speed column.
#[allow(clippy::too_many_arguments)]
pub fn bench_block(
    label: &str,
    kind: &MixerKind,
    channels: usize,
    mlp_ratio: usize,
    hw: usize,
    batch: usize,
    warmup: usize,
    iters: usize,
    train: bool,
) -> Result<BenchResult> {
    guard_size(batch, channels, hw)?;
    let mut rng = SplitMix64::new(WEIGHT_SEED);
    let params = BlockParams::<f32>::init(channels, mlp_ratio, kind, &mut rng)?;
    let x: Tensor<f32> = seeded_random(
        Shape::new(batch, channels, hw, hw),
        INPUT_SEED,
        Dist::Normal,
    );
    let cot: Tensor<f32> = seeded_random(x.shape(), INPUT_SEED ^ 1, Dist::Normal);
    run_bench(label, batch, warmup, iters, || {
        let y = metanext_block(&x, &params, kind).expect("bench shapes are valid");
        let mut sum = tensor_checksum(&y);
        if train {
            let (gx, _) =
                metanext_block_backward(&x, &params, kind, &cot).expect("bench shapes are valid");
            sum ^= tensor_checksum(&gx);
        }
        sum
    })
}
