//! Gradient-check runner: analytic backward vs central finite differences in
//! f64 on seeded fixtures, reported per parameter group.
//!
//! The scalar loss is the inner product of the forward output with a fixed
//! random cotangent; its parameter gradient is exactly the analytic backward
//! at that cotangent. The numeric side only ever calls the forward path.
//! Group error is `max_i |a_i - n_i|` normalized by the group's largest
//! gradient magnitude.

use clap::ValueEnum;

use inceptionnext::block::{
    metanext_block, metanext_block_backward, BlockParams, MixerKind, MixerWeightGrads, MixerWeights,
};
use inceptionnext::conv::{dwconv2d, dwconv2d_backward, pointwise, pointwise_backward};
use inceptionnext::error::Result;
use inceptionnext::mixer::{
    inception_dwconv, inception_dwconv_backward, BranchConfig, MixerParams,
};
use inceptionnext::rng::{seeded_random, Dist, SplitMix64};
use inceptionnext::tensor::{Shape, Tensor};

/// Targets with an analytic backward pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GradTarget {
    #[value(name = "dwconv")]
    Dwconv,
    #[value(name = "pointwise")]
    Pointwise,
    #[value(name = "inception_dwconv")]
    InceptionDwconv,
    #[value(name = "metanext_block")]
    MetanextBlock,
}

impl GradTarget {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Dwconv => "dwconv",
            Self::Pointwise => "pointwise",
            Self::InceptionDwconv => "inception_dwconv",
            Self::MetanextBlock => "metanext_block",
        }
    }

    /// Default pass tolerance: 1e-6 for plain conv ops, 1e-5 for the block.
    pub fn default_tolerance(&self) -> f64 {
        match self {
            Self::MetanextBlock => 1e-5,
            _ => 1e-6,
        }
    }
}

/// One parameter group's outcome.
#[derive(Debug, Clone)]
pub struct GroupError {
    pub group: String,
    pub max_rel_err: f64,
}

#[derive(Debug, Clone)]
pub struct GradcheckReport {
    pub target: String,
    pub seed: u64,
    pub eps: f64,
    pub tolerance: f64,
    pub groups: Vec<GroupError>,
    pub pass: bool,
}

impl GradcheckReport {
    pub fn render(&self) -> String {
        let mut s = String::new();
        for g in &self.groups {
            s.push_str(&format!(
                "{:<24} max_rel_err {:.3e}\n",
                g.group, g.max_rel_err
            ));
        }
        s.push_str(&format!(
            "gradcheck {}: {} (tolerance {:.1e}, eps {:.1e}, seed {})\n",
            self.target,
            if self.pass { "PASS" } else { "FAIL" },
            self.tolerance,
            self.eps,
            self.seed
        ));
        s
    }
}

fn inner(a: &Tensor<f64>, b: &Tensor<f64>) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| x * y).sum()
}

fn group_rel_err(analytic: &[f64], numeric: &[f64]) -> f64 {
    let scale = analytic
        .iter()
        .chain(numeric)
        .map(|v| v.abs())
        .fold(0.0f64, f64::max)
        .max(1e-12);
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs())
        .fold(0.0f64, f64::max)
        / scale
}

fn numeric_grad(data: &[f64], eps: f64, mut loss: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut work = data.to_vec();
    let mut grad = Vec::with_capacity(data.len());
    for idx in 0..work.len() {
        let orig = work[idx];
        work[idx] = orig + eps;
        let up = loss(&work);
        work[idx] = orig - eps;
        let down = loss(&work);
        work[idx] = orig;
        grad.push((up - down) / (2.0 * eps));
    }
    grad
}

/// Run the check for one target/seed.
pub fn run_gradcheck(
    target: GradTarget,
    seed: u64,
    eps: f64,
    tolerance: Option<f64>,
) -> Result<GradcheckReport> {
    let tolerance = tolerance.unwrap_or_else(|| target.default_tolerance());
    let groups = match target {
        GradTarget::Dwconv => dwconv_groups(seed, eps)?,
        GradTarget::Pointwise => pointwise_groups(seed, eps)?,
        GradTarget::InceptionDwconv => inception_groups(seed, eps)?,
        GradTarget::MetanextBlock => block_groups(seed, eps)?,
    };
    let pass = groups.iter().all(|g| g.max_rel_err < tolerance);
    Ok(GradcheckReport {
        target: target.name().to_string(),
        seed,
        eps,
        tolerance,
        groups,
        pass,
    })
}

fn dwconv_groups(seed: u64, eps: f64) -> Result<Vec<GroupError>> {
    let mut rng = SplitMix64::new(seed);
    let c = 3;
    let shape = Shape::new(1, c, 8, 8);
    let x: Tensor<f64> = seeded_random(shape, rng.next_u64(), Dist::Normal);
    let weight: Tensor<f64> = seeded_random(Shape::new(c, 1, 3, 3), rng.next_u64(), Dist::Normal);
    let bias: Vec<f64> = (0..c).map(|_| rng.normal_f64()).collect();
    let cot: Tensor<f64> = seeded_random(shape, rng.next_u64(), Dist::Normal);

    let grads = dwconv2d_backward(&x, &weight, &cot)?;
    let nx = numeric_grad(x.data(), eps, |d| {
        let xt = Tensor::new(shape, d.to_vec()).unwrap();
        inner(&dwconv2d(&xt, &weight, Some(&bias)).unwrap(), &cot)
    });
    let nw = numeric_grad(weight.data(), eps, |d| {
        let wt = Tensor::new(weight.shape(), d.to_vec()).unwrap();
        inner(&dwconv2d(&x, &wt, Some(&bias)).unwrap(), &cot)
    });
    let nb = numeric_grad(&bias, eps, |d| {
        inner(&dwconv2d(&x, &weight, Some(d)).unwrap(), &cot)
    });
    Ok(vec![
        GroupError {
            group: "input".into(),
            max_rel_err: group_rel_err(grads.grad_x.data(), &nx),
        },
        GroupError {
            group: "weight".into(),
            max_rel_err: group_rel_err(grads.grad_weight.data(), &nw),
        },
        GroupError {
            group: "bias".into(),
            max_rel_err: group_rel_err(&grads.grad_bias, &nb),
        },
    ])
}

fn pointwise_groups(seed: u64, eps: f64) -> Result<Vec<GroupError>> {
    let mut rng = SplitMix64::new(seed);
    let (c_in, c_out) = (4, 3);
    let shape = Shape::new(1, c_in, 6, 6);
    let x: Tensor<f64> = seeded_random(shape, rng.next_u64(), Dist::Normal);
    let weight: Tensor<f64> =
        seeded_random(Shape::new(c_out, c_in, 1, 1), rng.next_u64(), Dist::Normal);
    let bias: Vec<f64> = (0..c_out).map(|_| rng.normal_f64()).collect();
    let cot: Tensor<f64> = seeded_random(Shape::new(1, c_out, 6, 6), rng.next_u64(), Dist::Normal);

    let grads = pointwise_backward(&x, &weight, &cot)?;
    let nx = numeric_grad(x.data(), eps, |d| {
        let xt = Tensor::new(shape, d.to_vec()).unwrap();
        inner(&pointwise(&xt, &weight, Some(&bias)).unwrap(), &cot)
    });
    let nw = numeric_grad(weight.data(), eps, |d| {
        let wt = Tensor::new(weight.shape(), d.to_vec()).unwrap();
        inner(&pointwise(&x, &wt, Some(&bias)).unwrap(), &cot)
    });
    let nb = numeric_grad(&bias, eps, |d| {
        inner(&pointwise(&x, &weight, Some(d)).unwrap(), &cot)
    });
    Ok(vec![
        GroupError {
            group: "input".into(),
            max_rel_err: group_rel_err(grads.grad_x.data(), &nx),
        },
        GroupError {
            group: "weight".into(),
            max_rel_err: group_rel_err(grads.grad_weight.data(), &nw),
        },
        GroupError {
            group: "bias".into(),
            max_rel_err: group_rel_err(&grads.grad_bias, &nb),
        },
    ])
}

fn inception_groups(seed: u64, eps: f64) -> Result<Vec<GroupError>> {
    let mut rng = SplitMix64::new(seed);
    let cfg = BranchConfig {
        band_kernel: 5,
        ..BranchConfig::default()
    };
    let c = 16;
    let shape = Shape::new(1, c, 8, 8);
    let x: Tensor<f64> = seeded_random(shape, rng.next_u64(), Dist::Normal);
    let params = MixerParams::<f64>::init(c, &cfg, &mut rng)?;
    let cot: Tensor<f64> = seeded_random(shape, rng.next_u64(), Dist::Normal);

    let (grad_x, grads) = inception_dwconv_backward(&x, &params, &cfg, &cot)?;
    let mut out = Vec::new();
    let nx = numeric_grad(x.data(), eps, |d| {
        let xt = Tensor::new(shape, d.to_vec()).unwrap();
        inner(&inception_dwconv(&xt, &params, &cfg).unwrap(), &cot)
    });
    out.push(GroupError {
        group: "input".into(),
        max_rel_err: group_rel_err(grad_x.data(), &nx),
    });

    for name in ["square", "band_w", "band_h"] {
        let (branch, grad) = match name {
            "square" => (&params.square, &grads.square),
            "band_w" => (&params.band_w, &grads.band_w),
            _ => (&params.band_h, &grads.band_h),
        };
        let (Some(branch), Some(grad)) = (branch, grad) else {
            continue;
        };
        let w_shape = branch.weight.shape();
        let nw = numeric_grad(branch.weight.data(), eps, |d| {
            let mut p = params.clone();
            let slot = match name {
                "square" => p.square.as_mut().unwrap(),
                "band_w" => p.band_w.as_mut().unwrap(),
                _ => p.band_h.as_mut().unwrap(),
            };
            slot.weight = Tensor::new(w_shape, d.to_vec()).unwrap();
            inner(&inception_dwconv(&x, &p, &cfg).unwrap(), &cot)
        });
        out.push(GroupError {
            group: format!("{name}.weight"),
            max_rel_err: group_rel_err(grad.weight.data(), &nw),
        });
        let nb = numeric_grad(&branch.bias, eps, |d| {
            let mut p = params.clone();
            let slot = match name {
                "square" => p.square.as_mut().unwrap(),
                "band_w" => p.band_w.as_mut().unwrap(),
                _ => p.band_h.as_mut().unwrap(),
            };
            slot.bias = d.to_vec();
            inner(&inception_dwconv(&x, &p, &cfg).unwrap(), &cot)
        });
        out.push(GroupError {
            group: format!("{name}.bias"),
            max_rel_err: group_rel_err(&grad.bias, &nb),
        });
    }
    Ok(out)
}

fn block_groups(seed: u64, eps: f64) -> Result<Vec<GroupError>> {
    let mut rng = SplitMix64::new(seed);
    let kind = MixerKind::Inception {
        config: BranchConfig {
            band_kernel: 5,
            ..BranchConfig::default()
        },
    };
    let c = 8;
    let shape = Shape::new(1, c, 6, 6);
    let mut params = BlockParams::<f64>::init(c, 2, &kind, &mut rng)?;
    for i in 0..c {
        params.norm.mean[i] = rng.normal_f64() * 0.2;
        params.norm.var[i] = 0.5 + rng.uniform_f64();
        params.norm.gamma[i] = 0.5 + rng.uniform_f64();
        params.norm.beta[i] = rng.normal_f64() * 0.2;
    }
    params.layerscale = Some((0..c).map(|_| 0.5 + rng.uniform_f64()).collect());
    let x: Tensor<f64> = seeded_random(shape, rng.next_u64(), Dist::Normal);
    let cot: Tensor<f64> = seeded_random(shape, rng.next_u64(), Dist::Normal);

    let (grad_x, grads) = metanext_block_backward(&x, &params, &kind, &cot)?;
    let loss = |p: &BlockParams<f64>, xt: &Tensor<f64>| {
        inner(&metanext_block(xt, p, &kind).unwrap(), &cot)
    };

    let mut out = Vec::new();
    let nx = numeric_grad(x.data(), eps, |d| {
        let xt = Tensor::new(shape, d.to_vec()).unwrap();
        loss(&params, &xt)
    });
    out.push(GroupError {
        group: "input".into(),
        max_rel_err: group_rel_err(grad_x.data(), &nx),
    });

    let MixerWeightGrads::Inception(mg) = &grads.mixer else {
        unreachable!("inception mixer configured above");
    };
    let MixerWeights::Inception(mp) = &params.mixer else {
        unreachable!();
    };
    if let (Some(branch), Some(grad)) = (&mp.square, &mg.square) {
        let w_shape = branch.weight.shape();
        let nw = numeric_grad(branch.weight.data(), eps, |d| {
            let mut p = params.clone();
            if let MixerWeights::Inception(m) = &mut p.mixer {
                m.square.as_mut().unwrap().weight = Tensor::new(w_shape, d.to_vec()).unwrap();
            }
            loss(&p, &x)
        });
        out.push(GroupError {
            group: "mixer.square.weight".into(),
            max_rel_err: group_rel_err(grad.weight.data(), &nw),
        });
    }

    for label in ["fc1", "fc2"] {
        let (slot, grad) = if label == "fc1" {
            (&params.fc1, &grads.fc1)
        } else {
            (&params.fc2, &grads.fc2)
        };
        let w_shape = slot.weight.shape();
        let nw = numeric_grad(slot.weight.data(), eps, |d| {
            let mut p = params.clone();
            let target = if label == "fc1" {
                &mut p.fc1
            } else {
                &mut p.fc2
            };
            target.weight = Tensor::new(w_shape, d.to_vec()).unwrap();
            loss(&p, &x)
        });
        out.push(GroupError {
            group: format!("{label}.weight"),
            max_rel_err: group_rel_err(grad.weight.data(), &nw),
        });
        let nb = numeric_grad(&slot.bias, eps, |d| {
            let mut p = params.clone();
            let target = if label == "fc1" {
                &mut p.fc1
            } else {
                &mut p.fc2
            };
            target.bias = d.to_vec();
            loss(&p, &x)
        });
        out.push(GroupError {
            group: format!("{label}.bias"),
            max_rel_err: group_rel_err(&grad.bias, &nb),
        });
    }

    for label in ["gamma", "beta"] {
        let (vals, analytic) = if label == "gamma" {
            (&params.norm.gamma, &grads.norm_gamma)
        } else {
            (&params.norm.beta, &grads.norm_beta)
        };
        let nv = numeric_grad(vals, eps, |d| {
            let mut p = params.clone();
            if label == "gamma" {
                p.norm.gamma = d.to_vec();
            } else {
                p.norm.beta = d.to_vec();
            }
            loss(&p, &x)
        });
        out.push(GroupError {
            group: format!("norm.{label}"),
            max_rel_err: group_rel_err(analytic, &nv),
        });
    }

    let ls = params.layerscale.clone().unwrap();
    let nls = numeric_grad(&ls, eps, |d| {
        let mut p = params.clone();
        p.layerscale = Some(d.to_vec());
        loss(&p, &x)
    });
    out.push(GroupError {
        group: "layerscale".into(),
        max_rel_err: group_rel_err(grads.layerscale.as_ref().unwrap(), &nls),
    });
    Ok(out)
}
