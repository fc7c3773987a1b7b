//! The headline mixer identity on randomized cases: the four-branch forward
//! equals one grouped reference convolution whose per-channel kernels are the
//! branch kernels zero-embedded on a band-size canvas.

use inceptionnext::conv::{conv2d_reference, ConvSpec};
use inceptionnext::mixer::{
    equivalent_grouped_kernel, inception_dwconv, split_indexes, BandMode, BranchConfig, MixerParams,
};
use inceptionnext::rng::{seeded_random, Dist, SplitMix64};
use inceptionnext::scalar::Scalar;
use inceptionnext::tensor::{Shape, Tensor};

fn random_config(rng: &mut SplitMix64) -> BranchConfig {
    BranchConfig {
        square_kernel: 3,
        band_kernel: [7, 9, 11, 13][(rng.next_u64() % 4) as usize],
        branch_ratio: [1.0 / 16.0, 1.0 / 8.0, 1.0 / 4.0][(rng.next_u64() % 3) as usize],
        enable_square: rng.next_u64() % 4 != 0,
        enable_band_w: rng.next_u64() % 4 != 0,
        enable_band_h: rng.next_u64() % 4 != 0,
        band_mode: BandMode::Parallel,
    }
}

fn run_sweep<T: Scalar>(seed: u64, cases: usize, tol: f64) {
    let mut rng = SplitMix64::new(seed);
    for case in 0..cases {
        let cfg = random_config(&mut rng);
        let c = 1 + (rng.next_u64() % 32) as usize;
        if split_indexes(c, &cfg).is_err() {
            continue; // 3g > C for this (C, ratio) draw
        }
        let h = 3 + (rng.next_u64() % 14) as usize;
        let w = 3 + (rng.next_u64() % 14) as usize;
        let n = 1 + (rng.next_u64() % 2) as usize;
        let x: Tensor<T> = seeded_random(Shape::new(n, c, h, w), rng.next_u64(), Dist::Normal);
        let params = MixerParams::<T>::init(c, &cfg, &mut rng).unwrap();

        let got = inception_dwconv(&x, &params, &cfg).unwrap();
        assert_eq!(got.shape(), x.shape(), "case {case}: shape not preserved");

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
            "case {case}: max abs diff {diff} > {tol} ({cfg:?}, C={c})"
        );
    }
}

#[test]
fn mixer_matches_embedded_reference_100_cases_f32() {
    run_sweep::<f32>(0x0A11, 100, 1e-5);
}

#[test]
fn mixer_matches_embedded_reference_100_cases_f64() {
    run_sweep::<f64>(0x0A12, 100, 1e-10);
}

#[test]
fn shape_preserved_for_every_ablation_config() {
    let mut rng = SplitMix64::new(0x0A13);
    let variants = [
        BranchConfig::default(),
        BranchConfig {
            enable_band_w: false,
            ..BranchConfig::default()
        },
        BranchConfig {
            enable_band_h: false,
            ..BranchConfig::default()
        },
        BranchConfig {
            enable_square: false,
            ..BranchConfig::default()
        },
        BranchConfig {
            band_mode: BandMode::Sequential,
            ..BranchConfig::default()
        },
        BranchConfig {
            band_kernel: 7,
            ..BranchConfig::default()
        },
        BranchConfig {
            band_kernel: 9,
            ..BranchConfig::default()
        },
        BranchConfig {
            band_kernel: 13,
            ..BranchConfig::default()
        },
        BranchConfig {
            branch_ratio: 0.25,
            ..BranchConfig::default()
        },
        BranchConfig {
            branch_ratio: 1.0 / 16.0,
            ..BranchConfig::default()
        },
    ];
    for cfg in &variants {
        let c = 32;
        let x: Tensor<f32> = seeded_random(Shape::new(1, c, 14, 14), rng.next_u64(), Dist::Normal);
        let params = MixerParams::<f32>::init(c, cfg, &mut rng).unwrap();
        let y = inception_dwconv(&x, &params, cfg).unwrap();
        assert_eq!(y.shape(), x.shape(), "{cfg:?}");
    }
}
