//! Specialized conv paths vs the direct reference convolution on randomized
//! small cases, plus the structural conv properties (linearity, translation
//! equivariance).

use inceptionnext::conv::{conv2d_reference, dwconv2d, partial_dwconv, pointwise, ConvSpec};
use inceptionnext::rng::{seeded_random, Dist, SplitMix64};
use inceptionnext::scalar::Scalar;
use inceptionnext::tensor::{Shape, Tensor};

fn max_abs_diff<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| (x.to_f64() - y.to_f64()).abs())
        .fold(0.0, f64::max)
}

/// Random small geometry from a seeded stream: C <= 8, H,W <= 16, odd kernels.
fn random_case(rng: &mut SplitMix64) -> (usize, usize, usize, usize, usize) {
    let c = 1 + (rng.next_u64() % 8) as usize;
    let h = 3 + (rng.next_u64() % 14) as usize;
    let w = 3 + (rng.next_u64() % 14) as usize;
    let kh = 1 + 2 * (rng.next_u64() % 6) as usize;
    let kw = 1 + 2 * (rng.next_u64() % 6) as usize;
    (c, h, w, kh, kw)
}

fn run_dwconv_sweep<T: Scalar>(cases: usize, tol: f64) {
    let mut rng = SplitMix64::new(0xDDC0);
    for case in 0..cases {
        let (c, h, w, kh, kw) = random_case(&mut rng);
        let n = 1 + (rng.next_u64() % 2) as usize;
        let x: Tensor<T> = seeded_random(Shape::new(n, c, h, w), rng.next_u64(), Dist::Normal);
        let weight: Tensor<T> =
            seeded_random(Shape::new(c, 1, kh, kw), rng.next_u64(), Dist::Normal);
        let bias: Vec<T> = (0..c)
            .map(|_| T::from_f64(rng.normal_f64() * 0.5))
            .collect();
        let got = dwconv2d(&x, &weight, Some(&bias)).unwrap();
        let spec = ConvSpec::depthwise(c, kh, kw);
        let want = conv2d_reference(&x, &weight, Some(&bias), &spec).unwrap();
        let diff = max_abs_diff(&got, &want);
        assert!(diff <= tol, "case {case}: dwconv diff {diff} > {tol}");
    }
}

#[test]
fn dwconv_matches_reference_on_100_cases_f32() {
    run_dwconv_sweep::<f32>(100, 1e-5);
}

#[test]
fn dwconv_matches_reference_on_100_cases_f64() {
    run_dwconv_sweep::<f64>(100, 1e-10);
}

fn run_pointwise_sweep<T: Scalar>(cases: usize, tol: f64) {
    let mut rng = SplitMix64::new(0x9013);
    for case in 0..cases {
        let c_in = 1 + (rng.next_u64() % 8) as usize;
        let c_out = 1 + (rng.next_u64() % 8) as usize;
        let h = 1 + (rng.next_u64() % 16) as usize;
        let w = 1 + (rng.next_u64() % 16) as usize;
        let x: Tensor<T> = seeded_random(Shape::new(1, c_in, h, w), rng.next_u64(), Dist::Normal);
        let weight: Tensor<T> =
            seeded_random(Shape::new(c_out, c_in, 1, 1), rng.next_u64(), Dist::Normal);
        let bias: Vec<T> = (0..c_out)
            .map(|_| T::from_f64(rng.normal_f64() * 0.5))
            .collect();
        let got = pointwise(&x, &weight, Some(&bias)).unwrap();
        let spec = ConvSpec::pointwise(c_in, c_out);
        let want = conv2d_reference(&x, &weight, Some(&bias), &spec).unwrap();
        let diff = max_abs_diff(&got, &want);
        assert!(diff <= tol, "case {case}: pointwise diff {diff} > {tol}");
    }
}

#[test]
fn pointwise_matches_reference_on_100_cases_f32() {
    run_pointwise_sweep::<f32>(100, 1e-5);
}

#[test]
fn pointwise_matches_reference_on_100_cases_f64() {
    run_pointwise_sweep::<f64>(100, 1e-10);
}

#[test]
fn partial_dwconv_matches_sliced_reference() {
    let mut rng = SplitMix64::new(0x9A27);
    for case in 0..100 {
        let c = 2 + (rng.next_u64() % 7) as usize;
        let h = 4 + (rng.next_u64() % 12) as usize;
        let w = 4 + (rng.next_u64() % 12) as usize;
        let k = 1 + 2 * (rng.next_u64() % 3) as usize;
        let ratio = (rng.next_u64() % 5) as f64 / 4.0;
        let p = (c as f64 * ratio) as usize;
        let x: Tensor<f64> = seeded_random(Shape::new(1, c, h, w), rng.next_u64(), Dist::Normal);
        let weight: Tensor<f64> =
            seeded_random(Shape::new(p, 1, k, k), rng.next_u64(), Dist::Normal);
        let bias: Vec<f64> = (0..p).map(|_| rng.normal_f64()).collect();
        let got = partial_dwconv(&x, &weight, Some(&bias), ratio).unwrap();

        if p > 0 {
            let head = x.split_channels(&[p, c - p]).unwrap().remove(0);
            let spec = ConvSpec::depthwise(p, k, k);
            let want_head = conv2d_reference(&head, &weight, Some(&bias), &spec).unwrap();
            for ci in 0..p {
                for hi in 0..h {
                    for wi in 0..w {
                        let d = (got.get(0, ci, hi, wi) - want_head.get(0, ci, hi, wi)).abs();
                        assert!(d <= 1e-10, "case {case}");
                    }
                }
            }
        }
        for ci in p..c {
            for hi in 0..h {
                for wi in 0..w {
                    assert_eq!(got.get(0, ci, hi, wi), x.get(0, ci, hi, wi), "case {case}");
                }
            }
        }
    }
}

#[test]
fn conv_is_linear_with_zero_bias() {
    let mut rng = SplitMix64::new(0x71EA);
    for _ in 0..20 {
        let (c, h, w, kh, kw) = random_case(&mut rng);
        let x1: Tensor<f64> = seeded_random(Shape::new(1, c, h, w), rng.next_u64(), Dist::Normal);
        let x2: Tensor<f64> = seeded_random(Shape::new(1, c, h, w), rng.next_u64(), Dist::Normal);
        let weight: Tensor<f64> =
            seeded_random(Shape::new(c, 1, kh, kw), rng.next_u64(), Dist::Normal);
        let a = 1.0 + rng.uniform_f64();

        let combo = Tensor::new(
            x1.shape(),
            x1.data()
                .iter()
                .zip(x2.data())
                .map(|(&u, &v)| a * u + v)
                .collect(),
        )
        .unwrap();
        let lhs = dwconv2d(&combo, &weight, None).unwrap();
        let y1 = dwconv2d(&x1, &weight, None).unwrap();
        let y2 = dwconv2d(&x2, &weight, None).unwrap();
        for i in 0..lhs.data().len() {
            let rhs = a * y1.data()[i] + y2.data()[i];
            let d = (lhs.data()[i] - rhs).abs();
            assert!(d <= 1e-9 * rhs.abs().max(1.0));
        }
    }
}

#[test]
fn conv_is_translation_equivariant_away_from_borders() {
    let mut rng = SplitMix64::new(0x5217);
    let (c, h, w, k) = (3usize, 12usize, 12usize, 5usize);
    let x: Tensor<f64> = seeded_random(Shape::new(1, c, h, w), rng.next_u64(), Dist::Normal);
    let weight: Tensor<f64> = seeded_random(Shape::new(c, 1, k, k), rng.next_u64(), Dist::Normal);

    // Shift the input one pixel right/down (new edge filled with zeros).
    let mut data = vec![0.0f64; x.shape().len()];
    for ci in 0..c {
        for hi in 1..h {
            for wi in 1..w {
                data[x.shape().index(0, ci, hi, wi)] = x.get(0, ci, hi - 1, wi - 1);
            }
        }
    }
    let shifted = Tensor::new(x.shape(), data).unwrap();

    let y = dwconv2d(&x, &weight, None).unwrap();
    let y_shifted = dwconv2d(&shifted, &weight, None).unwrap();
    // Interior: at least k/2 + 1 away from every border in the shifted frame.
    let m = k / 2 + 1;
    for ci in 0..c {
        for hi in m..h - m {
            for wi in m..w - m {
                let d = (y_shifted.get(0, ci, hi, wi) - y.get(0, ci, hi - 1, wi - 1)).abs();
                assert!(d <= 1e-12, "interior shift mismatch at ({ci},{hi},{wi})");
            }
        }
    }
}
