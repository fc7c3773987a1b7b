//! Acceptance suite: one test per release criterion, each printing a
//! PASS/FAIL line. Tolerances are pinned in the constants below.
//!
//! The benchmark-ordering criterion is a hard gate only on the pinned
//! reference host (`INXT_PINNED_HOST=1` in the environment); elsewhere it
//! reports the measurement and passes.

use inceptionnext::block::{metanext_block, BlockParams, MixerKind};
use inceptionnext::checksum::tensor_checksum;
use inceptionnext::complexity::{
    analytic_conv_cost, count_dense_layer, count_depthwise_layer, count_mixer_layer,
    count_model_config, flops_curve, AnalyticKind,
};
use inceptionnext::conv::{conv2d_reference, ConvSpec};
use inceptionnext::mixer::{
    equivalent_grouped_kernel, inception_dwconv, split_indexes, BranchConfig, MixerParams,
};
use inceptionnext::model::{build_model, model_forward, model_forward_trace, preset, Model};
use inceptionnext::parallel::set_threads;
use inceptionnext::rng::{seeded_random, Dist, SplitMix64};
use inceptionnext::scalar::Scalar;
use inceptionnext::tensor::{Shape, Tensor};
use inxt_cli::bench::bench_layer;
use inxt_cli::commands::{ablation_config, ablation_variants};
use inxt_cli::gradcheck::{run_gradcheck, GradTarget};

/// Relative tolerance for published parameter/MAC totals (head ambiguity).
const PARAM_MAC_TOL: f64 = 0.03;
/// Oracle-equivalence max-abs tolerances.
const ORACLE_TOL_F32: f64 = 1e-5;
const ORACLE_TOL_F64: f64 = 1e-10;
/// Gradient-check thresholds (64-bit, central differences, h = 1e-4).
const GRAD_TOL_CONV: f64 = 1e-6;
const GRAD_TOL_BLOCK: f64 = 1e-5;
const GRAD_EPS: f64 = 1e-4;
const GRAD_CASES: u64 = 20;

fn within(actual: u64, target: f64, tol: f64) -> bool {
    (actual as f64 - target).abs() <= tol * target
}

fn pass(criterion: &str) {
    println!("ACCEPTANCE {criterion}: PASS");
}

#[test]
fn param_mac_reproduction() {
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
            within(report.total_params_with_bias, params, PARAM_MAC_TOL),
            "{name}: {} params vs published {params}",
            report.total_params_with_bias
        );
        assert!(
            within(report.total_macs, macs, PARAM_MAC_TOL),
            "{name}: {} MACs vs published {macs}",
            report.total_macs
        );
    }
    pass("param_mac_reproduction");
}

#[test]
fn table1_identity() {
    for &c in &[32usize, 96] {
        for &k in &[3usize, 5, 7, 11] {
            let (h, w) = (56, 56);
            let (p, f) = analytic_conv_cost(AnalyticKind::Conventional, k, c, h, w).unwrap();
            let walked = count_dense_layer(c, c, k, h, w);
            assert_eq!(walked.params_no_bias, p, "conventional k={k} C={c}");
            assert_eq!(walked.flops, f, "conventional k={k} C={c}");

            let (p, f) = analytic_conv_cost(AnalyticKind::Depthwise, k, c, h, w).unwrap();
            let walked = count_depthwise_layer(c, k, h, w);
            assert_eq!(walked.params_no_bias, p, "depthwise k={k} C={c}");
            assert_eq!(walked.flops, f, "depthwise k={k} C={c}");

            let cfg = BranchConfig {
                band_kernel: k,
                ..BranchConfig::default()
            };
            let (p, f) = analytic_conv_cost(AnalyticKind::Inception, k, c, h, w).unwrap();
            let walked = count_mixer_layer(c, &cfg, h, w).unwrap();
            assert_eq!(walked.params_no_bias, p, "inception k={k} C={c}");
            assert_eq!(walked.flops, f, "inception k={k} C={c}");
            assert_eq!(walked.macs, f / 2, "inception k={k} C={c}");
        }
    }
    pass("table1_identity");
}

#[test]
fn figure3_reproduction() {
    let (c, h, w) = (96usize, 56usize, 56usize);
    let ks: Vec<usize> = (3..=31).step_by(2).collect();
    let points = flops_curve(
        &[AnalyticKind::Depthwise, AnalyticKind::Inception],
        &ks,
        c,
        h,
        w,
    )
    .unwrap();
    let chw = (c * h * w) as u64;
    for p in &points {
        match p.kind {
            AnalyticKind::Depthwise => assert_eq!(p.flops, 2 * (p.k as u64).pow(2) * chw),
            AnalyticKind::Inception => assert_eq!(p.flops, (2 * p.k as u64 + 9) * chw / 4),
            AnalyticKind::Conventional => unreachable!(),
        }
    }
    let dw11 = points
        .iter()
        .find(|p| p.kind == AnalyticKind::Depthwise && p.k == 11)
        .unwrap()
        .flops;
    let inc11 = points
        .iter()
        .find(|p| p.kind == AnalyticKind::Inception && p.k == 11)
        .unwrap()
        .flops;
    let ratio = inc11 as f64 / dw11 as f64;
    assert_eq!(ratio, 31.0 / 968.0, "k=11 flops ratio");
    pass("figure3_reproduction");
}

fn oracle_sweep<T: Scalar>(seed: u64, cases: usize, tol: f64) {
    let mut rng = SplitMix64::new(seed);
    let mut run = 0usize;
    while run < cases {
        let cfg = BranchConfig {
            band_kernel: [7, 9, 11, 13][(rng.next_u64() % 4) as usize],
            branch_ratio: [1.0 / 16.0, 1.0 / 8.0, 1.0 / 4.0][(rng.next_u64() % 3) as usize],
            enable_square: rng.next_u64() % 4 != 0,
            enable_band_w: rng.next_u64() % 4 != 0,
            enable_band_h: rng.next_u64() % 4 != 0,
            ..BranchConfig::default()
        };
        let c = 1 + (rng.next_u64() % 32) as usize;
        if split_indexes(c, &cfg).is_err() {
            continue;
        }
        let h = 3 + (rng.next_u64() % 14) as usize;
        let w = 3 + (rng.next_u64() % 14) as usize;
        let x: Tensor<T> = seeded_random(Shape::new(1, c, h, w), rng.next_u64(), Dist::Normal);
        let params = MixerParams::<T>::init(c, &cfg, &mut rng).unwrap();

        let got = inception_dwconv(&x, &params, &cfg).unwrap();
        let (weight, bias) = equivalent_grouped_kernel(&params, &cfg, c).unwrap();
        let canvas = cfg.square_kernel.max(cfg.band_kernel);
        let spec = ConvSpec::depthwise(c, canvas, canvas);
        let want = conv2d_reference(&x, &weight, Some(&bias), &spec).unwrap();

        let diff = got
            .data()
            .iter()
            .zip(want.data())
            .map(|(&a, &b)| (a.to_f64() - b.to_f64()).abs())
            .fold(0.0, f64::max);
        assert!(
            diff <= tol,
            "case {run}: max abs {diff} > {tol} ({cfg:?}, C={c})"
        );
        run += 1;
    }
}

#[test]
fn oracle_equivalence() {
    oracle_sweep::<f32>(0xACC1, 100, ORACLE_TOL_F32);
    oracle_sweep::<f64>(0xACC2, 100, ORACLE_TOL_F64);
    pass("oracle_equivalence");
}

#[test]
fn gradient_checks() {
    for seed in 0..GRAD_CASES {
        for target in [
            GradTarget::Dwconv,
            GradTarget::Pointwise,
            GradTarget::InceptionDwconv,
        ] {
            let report = run_gradcheck(target, seed, GRAD_EPS, Some(GRAD_TOL_CONV)).unwrap();
            assert!(
                report.pass,
                "{} seed {seed}: {:?}",
                report.target, report.groups
            );
        }
        let report = run_gradcheck(
            GradTarget::MetanextBlock,
            seed,
            GRAD_EPS,
            Some(GRAD_TOL_BLOCK),
        )
        .unwrap();
        assert!(
            report.pass,
            "metanext_block seed {seed}: {:?}",
            report.groups
        );
    }
    pass("gradient_checks");
}

#[test]
fn structural_invariants() {
    // Split/concat round-trip, bit-exact.
    let mut rng = SplitMix64::new(0xACC3);
    for _ in 0..50 {
        let c = 1 + (rng.next_u64() % 24) as usize;
        let x: Tensor<f32> = seeded_random(Shape::new(1, c, 5, 5), rng.next_u64(), Dist::Normal);
        let mut remaining = c;
        let mut idx = Vec::new();
        while remaining > 0 {
            let take = 1 + (rng.next_u64() as usize % remaining);
            idx.push(take);
            remaining -= take;
        }
        if rng.next_u64() % 2 == 0 {
            idx.push(0);
        }
        let parts = x.split_channels(&idx).unwrap();
        assert_eq!(Tensor::concat_channels(&parts).unwrap(), x);
    }

    // Identity-branch passthrough, bit-exact.
    let cfg = BranchConfig::default();
    let c = 32;
    let params = MixerParams::<f32>::init(c, &cfg, &mut rng).unwrap();
    let x: Tensor<f32> = seeded_random(Shape::new(2, c, 10, 10), rng.next_u64(), Dist::Normal);
    let y = inception_dwconv(&x, &params, &cfg).unwrap();
    let g = split_indexes(c, &cfg).unwrap()[0];
    for n in 0..2 {
        for ch in 3 * g..c {
            for h in 0..10 {
                for w in 0..10 {
                    assert_eq!(y.get(n, ch, h, w), x.get(n, ch, h, w));
                }
            }
        }
    }

    // LayerScale zero turns every block kind into an exact identity.
    for kind in [
        MixerKind::Inception {
            config: BranchConfig::default(),
        },
        MixerKind::Depthwise { kernel: 7 },
        MixerKind::PartialDepthwise {
            kernel: 3,
            conv_ratio: 0.25,
        },
    ] {
        let mut params = BlockParams::<f32>::init(16, 4, &kind, &mut rng).unwrap();
        params.layerscale = Some(vec![0.0; 16]);
        let x: Tensor<f32> = seeded_random(Shape::new(1, 16, 8, 8), rng.next_u64(), Dist::Normal);
        assert_eq!(metanext_block(&x, &params, &kind).unwrap(), x, "{kind:?}");
    }

    // Forward checksums identical across worker counts 1/2/8.
    let model: Model<f32> = build_model(&preset("inceptionnext_t").unwrap(), 42).unwrap();
    let x: Tensor<f32> = seeded_random(Shape::new(1, 3, 64, 64), 43, Dist::Uniform);
    let mut sums = Vec::new();
    for t in [1usize, 2, 8] {
        set_threads(t);
        sums.push(tensor_checksum(&model_forward(&model, &x).unwrap()));
    }
    set_threads(0); // restore default resolution
    assert!(sums.windows(2).all(|w| w[0] == w[1]), "{sums:?}");

    pass("structural_invariants");
}

#[test]
fn ablation_grid() {
    // Published params per variant, in millions.
    let published: &[(&str, f64)] = &[
        ("baseline", 28.1),
        ("remove_horizontal_band", 28.0),
        ("remove_vertical_band", 28.0),
        ("remove_square", 28.0),
        ("sequential_band", 28.1),
        ("band_kernel_7", 28.0),
        ("band_kernel_9", 28.1),
        ("band_kernel_13", 28.1),
        ("ratio_1_4", 28.1),
        ("ratio_1_16", 28.0),
    ];
    let variants = ablation_variants();
    assert_eq!(variants.len(), published.len());
    let input = Shape::new(1, 3, 224, 224);
    for ((name, branch_cfg), (pub_name, pub_params)) in variants.iter().zip(published) {
        assert_eq!(name, pub_name);
        let cfg = ablation_config(branch_cfg);
        // Constructible: the mixer itself must run at every stage width.
        let mut rng = SplitMix64::new(1);
        for &dim in &cfg.dims {
            let params = MixerParams::<f32>::init(dim, branch_cfg, &mut rng).unwrap();
            let x: Tensor<f32> =
                seeded_random(Shape::new(1, dim, 7, 7), rng.next_u64(), Dist::Normal);
            let y = inception_dwconv(&x, &params, branch_cfg).unwrap();
            assert_eq!(y.shape(), x.shape());
        }
        let report = count_model_config(&cfg, input).unwrap();
        assert!(
            within(
                report.total_params_with_bias,
                pub_params * 1e6,
                PARAM_MAC_TOL
            ),
            "{name}: {} params vs published {pub_params}M",
            report.total_params_with_bias
        );
        assert!(
            within(report.total_macs, 4.2e9, PARAM_MAC_TOL),
            "{name}: {} MACs vs published 4.2G",
            report.total_macs
        );
    }
    pass("ablation_grid");
}

#[test]
fn shape_contract() {
    let model: Model<f32> = build_model(&preset("inceptionnext_t").unwrap(), 7).unwrap();
    let x: Tensor<f32> = seeded_random(Shape::new(1, 3, 224, 224), 8, Dist::Uniform);
    let (stages, logits) = model_forward_trace(&model, &x).unwrap();
    assert_eq!(
        stages,
        vec![
            Shape::new(1, 96, 56, 56),
            Shape::new(1, 192, 28, 28),
            Shape::new(1, 384, 14, 14),
            Shape::new(1, 768, 7, 7),
        ]
    );
    assert_eq!(logits.shape(), Shape::new(1, 1000, 1, 1));
    pass("shape_contract");
}

#[test]
fn bench_sanity() {
    let inception = bench_layer("inception:kb=11,C=96,HW=56", 1, 2, 10, false).unwrap();
    let dwconv = bench_layer("dwconv:k=11,C=96,HW=56", 1, 2, 10, false).unwrap();
    let pinned = std::env::var("INXT_PINNED_HOST").is_ok_and(|v| v == "1");
    println!(
        "bench_sanity: inception median {} ns vs dwconv median {} ns ({})",
        inception.median_ns,
        dwconv.median_ns,
        if pinned {
            "pinned host: enforcing"
        } else {
            "report-only"
        }
    );
    if pinned {
        assert!(
            inception.median_ns < dwconv.median_ns,
            "inception {} ns !< dwconv {} ns on pinned host",
            inception.median_ns,
            dwconv.median_ns
        );
    }
    pass("bench_sanity");
}
