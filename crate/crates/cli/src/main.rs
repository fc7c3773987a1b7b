//! `inxt`: CPU playground for the InceptionNeXt block family: complexity
//! reports, throughput microbenchmarks, forward checksums, gradient checks,
//! and the mixer ablation grid.
//!
//! Exit codes: 0 success, 1 check failure, 2 usage or runtime error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use inceptionnext::error::Result;
use inceptionnext::parallel::set_threads;
use inxt_cli::bench::{bench_layer, bench_model, BenchResult, DEFAULT_ITERS, DEFAULT_WARMUP};
use inxt_cli::commands::{
    ablate_csv, cmd_ablate, cmd_count, cmd_flops_curve, cmd_flops_model, cmd_forward,
    resolve_model_config,
};
use inxt_cli::gradcheck::{run_gradcheck, GradTarget};

#[derive(Parser)]
#[command(
    name = "inxt",
    about = "InceptionNeXt on CPU: complexity reports, microbenchmarks, forward checksums, gradient checks, ablation grids",
    long_about = None,
    version
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Analytic FLOPs curves or model totals
    Flops(FlopsArgs),
    /// Throughput microbenchmark for a layer or a model preset
    Bench(BenchArgs),
    /// Deterministic forward pass: logits checksum and top-5 classes
    Forward(ForwardArgs),
    /// Analytic backward vs central finite differences
    Gradcheck(GradcheckArgs),
    /// Mixer ablation grid: params, MACs, block latency per variant
    Ablate(AblateArgs),
    /// Per-layer parameter/MAC report for a model
    Count(CountArgs),
}

#[derive(Args)]
struct FlopsArgs {
    /// Comma-separated conv kinds for curve emission (conventional, depthwise, inception)
    #[arg(long, conflicts_with = "model")]
    curve: Option<String>,
    /// Kernel-size range `start:end[:step]` or a single odd size
    #[arg(long, default_value = "3:31:2")]
    k: String,
    /// Channel count for the curves
    #[arg(long = "C", default_value_t = 96)]
    c: usize,
    /// Square spatial size for the curves
    #[arg(long = "HW", default_value_t = 56)]
    hw: usize,
    /// Model preset name or config JSON path (emits totals instead of curves)
    #[arg(long)]
    model: Option<String>,
    /// Input resolution for model totals
    #[arg(long, default_value_t = 224)]
    input: usize,
}

#[derive(Args)]
struct BenchArgs {
    /// Layer spec, e.g. `dwconv:k=11,C=96,HW=56` or `inception:kb=11,C=96,HW=56`
    #[arg(long, conflicts_with = "model")]
    layer: Option<String>,
    /// Model preset name or config JSON path
    #[arg(long)]
    model: Option<String>,
    #[arg(long, default_value_t = 1)]
    batch: usize,
    #[arg(long, default_value_t = DEFAULT_WARMUP)]
    warmup: usize,
    /// Timed iterations (minimum 10)
    #[arg(long, default_value_t = DEFAULT_ITERS)]
    iters: usize,
    /// Input resolution for model targets
    #[arg(long, default_value_t = 224)]
    input: usize,
    /// Worker threads (default: INXT_THREADS or all cores)
    #[arg(long)]
    threads: Option<usize>,
    /// Also time the analytic backward pass (layers with backward only)
    #[arg(long)]
    train: bool,
}

#[derive(Args)]
struct ForwardArgs {
    /// Model preset name or config JSON path (optional with --weights)
    #[arg(long, required_unless_present = "weights")]
    model: Option<String>,
    /// Seed for the weights; the input tensor uses seed + 1
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Square input resolution
    #[arg(long, default_value_t = 224)]
    input: usize,
    #[arg(long, default_value_t = 1)]
    batch: usize,
    /// Load weights from a container file instead of seeding them
    #[arg(long)]
    weights: Option<PathBuf>,
    /// Worker threads (default: INXT_THREADS or all cores)
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct GradcheckArgs {
    /// One of: dwconv, pointwise, inception-dwconv, metanext-block
    #[arg(long, value_enum)]
    target: GradTarget,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Finite-difference step
    #[arg(long, default_value_t = 1e-4)]
    eps: f64,
    /// Pass threshold (default: 1e-6 for conv ops, 1e-5 for the block)
    #[arg(long)]
    tolerance: Option<f64>,
}

#[derive(Args)]
struct AblateArgs {
    /// Input resolution for the params/MACs columns
    #[arg(long, default_value_t = 224)]
    input: usize,
    #[arg(long, default_value_t = 1)]
    batch: usize,
    #[arg(long, default_value_t = 2)]
    warmup: usize,
    /// Timed iterations for the latency column (minimum 10)
    #[arg(long, default_value_t = 10)]
    iters: usize,
    /// Skip the latency column (median_ns = 0)
    #[arg(long)]
    no_bench: bool,
    /// Worker threads (default: INXT_THREADS or all cores)
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct CountArgs {
    /// Model preset name or config JSON path
    #[arg(long)]
    model: String,
    /// Input resolution
    #[arg(long, default_value_t = 224)]
    input: usize,
}

fn run(cli: Cli) -> Result<u8> {
    match cli.cmd {
        Cmd::Flops(a) => {
            let out = match (&a.curve, &a.model) {
                (Some(kinds), None) => cmd_flops_curve(kinds, &a.k, a.c, a.hw)?,
                (None, Some(model)) => cmd_flops_model(model, a.input)?,
                _ => {
                    return Err(inceptionnext::Error::config(
                        "flops needs exactly one of --curve or --model",
                    ))
                }
            };
            if out.ends_with('\n') {
                print!("{out}");
            } else {
                println!("{out}");
            }
            Ok(0)
        }
        Cmd::Bench(a) => {
            if let Some(t) = a.threads {
                set_threads(t);
            }
            let result: BenchResult = match (&a.layer, &a.model) {
                (Some(layer), None) => bench_layer(layer, a.batch, a.warmup, a.iters, a.train)?,
                (None, Some(model)) => {
                    if a.train {
                        return Err(inceptionnext::Error::config(
                            "train-like timing is only available for layer targets",
                        ));
                    }
                    let cfg = resolve_model_config(model)?;
                    bench_model(model, &cfg, a.batch, a.input, a.warmup, a.iters)?
                }
                _ => {
                    return Err(inceptionnext::Error::config(
                        "bench needs exactly one of --layer or --model",
                    ))
                }
            };
            println!("{}", BenchResult::csv_header());
            println!("{}", result.csv_row());
            Ok(0)
        }
        Cmd::Forward(a) => {
            if let Some(t) = a.threads {
                set_threads(t);
            }
            let out = cmd_forward(
                a.model.as_deref().unwrap_or(""),
                a.seed,
                a.input,
                a.batch,
                a.weights.as_deref(),
            )?;
            print!("{}", out.render());
            Ok(0)
        }
        Cmd::Gradcheck(a) => {
            let report = run_gradcheck(a.target, a.seed, a.eps, a.tolerance)?;
            print!("{}", report.render());
            Ok(if report.pass { 0 } else { 1 })
        }
        Cmd::Ablate(a) => {
            if let Some(t) = a.threads {
                set_threads(t);
            }
            let rows = cmd_ablate(a.input, a.batch, a.warmup, a.iters, !a.no_bench)?;
            print!("{}", ablate_csv(&rows));
            Ok(0)
        }
        Cmd::Count(a) => {
            println!("{}", cmd_count(&a.model, a.input)?);
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
