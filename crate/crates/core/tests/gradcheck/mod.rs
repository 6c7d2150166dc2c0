//! Central finite differences against the tape in 64-bit arithmetic. Each
//! case returns the worst relative error over its instances.
#![allow(dead_code)]

use polarfuse_core::loss::{detection_loss, focal_loss, smooth_l1, LossConfig, TargetMaps};
use polarfuse_core::tensor::BatchNormMode;
use polarfuse_core::{ConvSpec, Graph, Tensor, Var};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const H: f64 = 1e-5;
pub const TOL: f64 = 1e-4;
pub const INSTANCES: usize = 20;

fn random(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor<f64> {
    let n = shape.iter().product();
    // Keep clear of the ReLU kink.
    let data = (0..n)
        .map(|_| {
            let v: f64 = rng.random_range(-1.0..1.0);
            if v.abs() < 1e-3 { v + 2e-3f64.copysign(v) } else { v }
        })
        .collect();
    Tensor::new(shape, data).unwrap()
}

/// `‖a − b‖ / max(‖a‖, ‖b‖)`.
fn rel_error(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let scale = a.iter().map(|x| x * x).sum::<f64>().sqrt().max(b.iter().map(|x| x * x).sum::<f64>().sqrt());
    if scale < 1e-12 { diff } else { diff / scale }
}

/// Builds `sum(f(inputs) ⊙ R)` for a fixed random `R`, differentiates it,
/// and compares against central differences for every input element.
fn check(inputs: Vec<Tensor<f64>>, rng: &mut ChaCha8Rng, f: &dyn Fn(&mut Graph<f64>, &[Var]) -> Var) -> f64 {
    let probe_seed: u64 = rng.random();
    let eval = |inputs: &[Tensor<f64>], grad: bool| -> (f64, Vec<Tensor<f64>>) {
        let mut g = Graph::new();
        let vars: Vec<Var> = inputs.iter().map(|t| g.leaf(t.clone(), true)).collect();
        let out = f(&mut g, &vars);
        let shape = g.value(out).shape().to_vec();
        let mut prng = ChaCha8Rng::seed_from_u64(probe_seed);
        let r = g.constant(random(&mut prng, &shape));
        let prod = g.mul(out, r).unwrap();
        let root = g.sum(prod).unwrap();
        let value = g.value(root).data()[0];
        if !grad {
            return (value, Vec::new());
        }
        let grads = g.backward(root).unwrap();
        (value, vars.iter().map(|&v| grads.get(v)).collect())
    };
    let (_, analytic) = eval(&inputs, true);
    let mut worst = 0.0f64;
    for (k, input) in inputs.iter().enumerate() {
        let mut numeric = vec![0.0; input.numel()];
        for e in 0..input.numel() {
            let mut plus = inputs.clone();
            plus[k].data_mut()[e] += H;
            let mut minus = inputs.clone();
            minus[k].data_mut()[e] -= H;
            numeric[e] = (eval(&plus, false).0 - eval(&minus, false).0) / (2.0 * H);
        }
        worst = worst.max(rel_error(analytic[k].data(), &numeric));
    }
    worst
}

fn conv_case(rng: &mut ChaCha8Rng, transposed: bool) -> (ConvSpec, Vec<usize>) {
    let (ci, co) = (rng.random_range(1..4), rng.random_range(1..4));
    let (kh, kw) = (rng.random_range(1..4), rng.random_range(1..4));
    let mut spec = ConvSpec::new(ci, co, 1)
        .kernel2(kh, kw)
        .stride(rng.random_range(1..3), rng.random_range(1..3))
        .dilation(rng.random_range(1..3), rng.random_range(1..3));
    if !transposed {
        spec = spec.padding(rng.random_range(0..kh), rng.random_range(0..kw));
    }
    if rng.random_bool(0.3) {
        spec = spec.no_bias();
    }
    let n = rng.random_range(1..3);
    let shape = vec![n, ci, rng.random_range(5..8), rng.random_range(5..8)];
    (spec, shape)
}

pub fn conv2d_case() -> f64 {
    let mut worst = 0.0f64;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..INSTANCES {
        let (spec, shape) = conv_case(&mut rng, false);
        let mut inputs = vec![random(&mut rng, &shape), random(&mut rng, &spec.weight_shape())];
        if spec.bias {
            inputs.push(random(&mut rng, &[spec.out_channels]));
        }
        worst = worst.max(check(inputs, &mut rng, &|g, v| g.conv2d(v[0], v[1], v.get(2).copied(), &spec).unwrap()));
    }
    worst
}

pub fn conv_transpose2d_case() -> f64 {
    let mut worst = 0.0f64;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..INSTANCES {
        let (spec, shape) = conv_case(&mut rng, true);
        let mut inputs = vec![random(&mut rng, &shape), random(&mut rng, &spec.transposed_weight_shape())];
        if spec.bias {
            inputs.push(random(&mut rng, &[spec.out_channels]));
        }
        worst = worst.max(check(inputs, &mut rng, &|g, v| {
            g.conv_transpose2d(v[0], v[1], v.get(2).copied(), &spec).unwrap()
        }));
    }
    worst
}

pub fn batchnorm_training() -> f64 {
    let mut worst = 0.0f64;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..INSTANCES {
        let c = rng.random_range(1..4);
        let shape = [rng.random_range(1..3), c, rng.random_range(2..5), rng.random_range(2..5)];
        let inputs = vec![random(&mut rng, &shape), random(&mut rng, &[c]), random(&mut rng, &[c])];
        worst = worst.max(check(inputs, &mut rng, &|g, v| {
            g.batchnorm(v[0], v[1], v[2], BatchNormMode::Training, 1e-5).unwrap().0
        }));
    }
    worst
}

pub fn batchnorm_inference() -> f64 {
    let mut worst = 0.0f64;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..INSTANCES {
        let c = rng.random_range(1..4);
        let shape = [c, rng.random_range(2..5), rng.random_range(2..5)];
        let mean: Vec<f64> = (0..c).map(|_| rng.random_range(-0.5..0.5)).collect();
        let var: Vec<f64> = (0..c).map(|_| rng.random_range(0.2..2.0)).collect();
        let inputs = vec![random(&mut rng, &shape), random(&mut rng, &[c]), random(&mut rng, &[c])];
        worst = worst.max(check(inputs, &mut rng, &|g, v| {
            let mode = BatchNormMode::Inference { mean: mean.clone(), var: var.clone() };
            g.batchnorm(v[0], v[1], v[2], mode, 1e-5).unwrap().0
        }));
    }
    worst
}

fn shape3(rng: &mut ChaCha8Rng) -> Vec<usize> {
    vec![rng.random_range(1..3), rng.random_range(1..4), rng.random_range(1..5), rng.random_range(1..5)]
}

pub fn elementwise_ops() -> f64 {
    let mut worst = 0.0f64;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..INSTANCES {
        let s = shape3(&mut rng);
        let factor = rng.random_range(-3.0..3.0);
        worst = worst.max(check(vec![random(&mut rng, &s)], &mut rng, &|g, v| g.relu(v[0])));
        worst = worst.max(check(vec![random(&mut rng, &s)], &mut rng, &|g, v| g.sigmoid(v[0])));
        worst = worst.max(check(vec![random(&mut rng, &s)], &mut rng, &|g, v| g.scale(v[0], factor).unwrap()));
        let two = vec![random(&mut rng, &s), random(&mut rng, &s)];
        worst = worst.max(check(two.clone(), &mut rng, &|g, v| g.add(v[0], v[1]).unwrap()));
        worst = worst.max(check(two, &mut rng, &|g, v| g.mul(v[0], v[1]).unwrap()));
        worst = worst.max(check(vec![random(&mut rng, &s)], &mut rng, &|g, v| g.sum(v[0]).unwrap()));
    }
    worst
}

pub fn layout_ops() -> f64 {
    let mut worst = 0.0f64;
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let orders = [[0, 3, 2, 1], [0, 2, 1, 3], [1, 0, 3, 2], [3, 1, 0, 2]];
    for k in 0..INSTANCES {
        let s = shape3(&mut rng);
        let order = orders[k % orders.len()];
        worst = worst.max(check(vec![random(&mut rng, &s)], &mut rng, &|g, v| g.permute(v[0], &order).unwrap()));
        let mut s2 = s.clone();
        s2[1] = rng.random_range(1..4);
        let inputs = vec![random(&mut rng, &s), random(&mut rng, &s2)];
        worst = worst.max(check(inputs, &mut rng, &|g, v| g.concat_channels(v[0], v[1]).unwrap()));
    }
    worst
}

pub fn composed_block() -> f64 {
    // Conv, batch norm, ReLU and a residual sum chained on one tape.
    let mut worst = 0.0f64;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..INSTANCES {
        let c = rng.random_range(1..3);
        let spec = ConvSpec::new(c, c, 3).padding(1, 1).no_bias();
        let inputs = vec![
            random(&mut rng, &[2, c, 4, 5]),
            random(&mut rng, &spec.weight_shape()),
            random(&mut rng, &[c]),
            random(&mut rng, &[c]),
        ];
        worst = worst.max(check(inputs, &mut rng, &|g, v| {
            let y = g.conv2d(v[0], v[1], None, &spec).unwrap();
            let (y, _) = g.batchnorm(y, v[2], v[3], BatchNormMode::Training, 1e-5).unwrap();
            let y = g.add(y, v[0]).unwrap();
            g.relu(y)
        }));
    }
    worst
}

/// Central differences of a scalar loss over every element of `x`.
fn numeric_grad(x: &Tensor<f64>, f: &dyn Fn(&Tensor<f64>) -> f64) -> Vec<f64> {
    (0..x.numel())
        .map(|e| {
            let mut p = x.clone();
            p.data_mut()[e] += H;
            let mut m = x.clone();
            m.data_mut()[e] -= H;
            (f(&p) - f(&m)) / (2.0 * H)
        })
        .collect()
}

fn random_targets(rng: &mut ChaCha8Rng, n: usize, gr: usize, ga: usize) -> TargetMaps<f64> {
    let cls = Tensor::from_fn(&[n, 1, gr, ga], |_| if rng.random_bool(0.3) { 1.0 } else { 0.0 });
    let reg = Tensor::from_fn(&[n, 2, gr, ga], |_| rng.random_range(-5.0..5.0));
    TargetMaps { cls, reg }
}

fn random_probs(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor<f64> {
    Tensor::from_fn(shape, |_| rng.random_range(0.01..0.99))
}

/// Regression predictions kept away from the smooth-L1 breakpoint.
fn random_reg(rng: &mut ChaCha8Rng, y: &Tensor<f64>) -> Tensor<f64> {
    let data = y
        .data()
        .iter()
        .map(|&v| {
            let mut e: f64 = 0.0;
            while (e.abs() - 1.0).abs() < 1e-3 || e.abs() < 1e-3 {
                e = rng.random_range(-3.0..3.0);
            }
            v + e
        })
        .collect();
    Tensor::new(y.shape(), data).unwrap()
}

pub fn focal_term() -> f64 {
    let mut worst = 0.0f64;
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..INSTANCES {
        let cfg = LossConfig {
            gamma: [0.0, 0.5, 1.0, 2.0, 3.0][rng.random_range(0..5)],
            alpha_focal: rng.random_range(0.05..0.95),
            ..LossConfig::default()
        };
        let n = rng.random_range(1..3);
        let t = random_targets(&mut rng, n, 4, 5);
        let p = random_probs(&mut rng, t.cls.shape());
        let (_, g) = focal_loss(&t.cls, &p, &cfg).unwrap();
        let num = numeric_grad(&p, &|x| focal_loss(&t.cls, x, &cfg).unwrap().0);
        worst = worst.max(rel_error(g.data(), &num));
    }
    worst
}

pub fn regression_term() -> f64 {
    let mut worst = 0.0f64;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..INSTANCES {
        let n = rng.random_range(1..3);
        let t = random_targets(&mut rng, n, 4, 5);
        let r = random_reg(&mut rng, &t.reg);
        let (_, g) = smooth_l1(&t.reg, &r, &t.cls).unwrap();
        let num = numeric_grad(&r, &|x| smooth_l1(&t.reg, x, &t.cls).unwrap().0);
        worst = worst.max(rel_error(g.data(), &num));
    }
    worst
}

pub fn combined_loss_through_tape() -> f64 {
    let mut worst = 0.0f64;
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for _ in 0..INSTANCES {
        let cfg = LossConfig {
            alpha: rng.random_range(0.5..100.0),
            ..LossConfig::default()
        };
        let t = random_targets(&mut rng, 2, 3, 4);
        let logits = random(&mut rng, t.cls.shape());
        let r = random_reg(&mut rng, &t.reg);
        let loss_of = |logits: &Tensor<f64>, r: &Tensor<f64>, grad: bool| -> (f64, Option<(Tensor<f64>, Tensor<f64>)>) {
            let mut g = Graph::new();
            let lv = g.leaf(logits.clone(), true);
            let rv = g.leaf(r.clone(), true);
            let p = g.sigmoid(lv);
            let l = detection_loss(g.value(p), g.value(rv), &t, &cfg).unwrap();
            let root = g.custom_scalar(l.total, vec![(p, l.grad_cls), (rv, l.grad_reg)]).unwrap();
            let out = grad.then(|| {
                let gr = g.backward(root).unwrap();
                (gr.get(lv), gr.get(rv))
            });
            (l.total, out)
        };
        let (_, Some((gl, gr))) = loss_of(&logits, &r, true) else { unreachable!() };
        let nl = numeric_grad(&logits, &|x| loss_of(x, &r, false).0);
        let nr = numeric_grad(&r, &|x| loss_of(&logits, x, false).0);
        worst = worst.max(rel_error(gl.data(), &nl)).max(rel_error(gr.data(), &nr));
    }
    worst
}

/// Every case by name.
pub const CASES: [(&str, fn() -> f64); 10] = [
    ("conv2d", conv2d_case),
    ("conv_transpose2d", conv_transpose2d_case),
    ("batchnorm (batch statistics)", batchnorm_training),
    ("batchnorm (running statistics)", batchnorm_inference),
    ("elementwise", elementwise_ops),
    ("permute / concat", layout_ops),
    ("composed block", composed_block),
    ("focal term", focal_term),
    ("smooth-L1 term", regression_term),
    ("combined loss", combined_loss_through_tape),
];
