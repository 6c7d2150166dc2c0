//! Tape-based reverse-mode differentiation over the tensor operators.

use super::ops::{self, nchw, ConvSpec};
use super::{Result, Scalar, Tensor, TensorError};

/// Handle to a value recorded on a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Statistics used by a batch-norm node.
#[derive(Clone, Debug)]
pub enum BatchNormMode<T> {
    /// Fixed running statistics.
    Inference { mean: Vec<T>, var: Vec<T> },
    /// Statistics of the current batch over `N×H×W`.
    Training,
}

/// Per-channel batch mean and unbiased variance observed in training mode.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchStats<T> {
    pub mean: Vec<T>,
    pub var: Vec<T>,
}

enum Op<T> {
    Leaf,
    Conv2d {
        x: Var,
        w: Var,
        b: Option<Var>,
        spec: ConvSpec,
    },
    ConvTranspose2d {
        x: Var,
        w: Var,
        b: Option<Var>,
        spec: ConvSpec,
    },
    BatchNorm {
        x: Var,
        gamma: Var,
        beta: Var,
        mean: Vec<T>,
        inv_std: Vec<T>,
        training: bool,
    },
    Relu(Var),
    Sigmoid(Var),
    Permute {
        x: Var,
        order: Vec<usize>,
    },
    Concat {
        a: Var,
        b: Var,
    },
    Add(Var, Var),
    Mul(Var, Var),
    Scale(Var, T),
    Sum(Var),
    /// Scalar whose local gradients were computed by the caller.
    Custom(Vec<(Var, Tensor<T>)>),
}

struct Node<T> {
    value: Tensor<T>,
    op: Op<T>,
    requires_grad: bool,
}

/// Records operator applications so that [`backward`](Graph::backward) can
/// replay them in reverse. A graph is single-use: build, differentiate, drop.
pub struct Graph<T: Scalar> {
    nodes: Vec<Node<T>>,
    record: bool,
}

impl<T: Scalar> Default for Graph<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> Graph<T> {
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            record: true,
        }
    }

    /// Graph that keeps values but records no backward information.
    pub fn inference() -> Self {
        Self {
            nodes: Vec::new(),
            record: false,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>, inputs: &[Var]) -> Var {
        let requires_grad = self.record && inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        let op = if requires_grad { op } else { Op::Leaf };
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn leaf(&mut self, value: Tensor<T>, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            requires_grad: requires_grad && self.record,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn param(&mut self, value: Tensor<T>) -> Var {
        self.leaf(value, true)
    }

    pub fn constant(&mut self, value: Tensor<T>) -> Var {
        self.leaf(value, false)
    }

    /// Copy of `x` cut off from the tape.
    pub fn detach(&mut self, x: Var) -> Var {
        let value = self.nodes[x.0].value.clone();
        self.constant(value)
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    pub fn conv2d(&mut self, x: Var, w: Var, b: Option<Var>, spec: &ConvSpec) -> Result<Var> {
        let out = ops::conv2d(self.value(x), spec, self.value(w), b.map(|b| self.value(b)))?;
        let mut inputs = vec![x, w];
        inputs.extend(b);
        Ok(self.push(out, Op::Conv2d { x, w, b, spec: *spec }, &inputs))
    }

    pub fn conv_transpose2d(&mut self, x: Var, w: Var, b: Option<Var>, spec: &ConvSpec) -> Result<Var> {
        let out = ops::conv_transpose2d(self.value(x), spec, self.value(w), b.map(|b| self.value(b)))?;
        let mut inputs = vec![x, w];
        inputs.extend(b);
        Ok(self.push(out, Op::ConvTranspose2d { x, w, b, spec: *spec }, &inputs))
    }

    /// Batch normalization with trainable `gamma`/`beta`. In training mode the
    /// observed batch statistics are returned so callers can update running
    /// estimates.
    pub fn batchnorm(
        &mut self,
        x: Var,
        gamma: Var,
        beta: Var,
        mode: BatchNormMode<T>,
        eps: T,
    ) -> Result<(Var, Option<BatchStats<T>>)> {
        let input = self.value(x);
        let (n, c, h, w) = nchw(input.shape(), "batchnorm")?;
        let g = self.value(gamma).data().to_vec();
        let bt = self.value(beta).data().to_vec();
        if g.len() != c || bt.len() != c {
            return Err(TensorError::ShapeMismatch {
                op: "batchnorm",
                detail: format!("gamma/beta lengths {}/{} for {c} channels", g.len(), bt.len()),
            });
        }
        let plane = h * w;
        let count = n * plane;
        let (mean, var, stats, training) = match mode {
            BatchNormMode::Inference { mean, var } => {
                if mean.len() != c || var.len() != c {
                    return Err(TensorError::ShapeMismatch {
                        op: "batchnorm",
                        detail: format!("running stats lengths {}/{} for {c} channels", mean.len(), var.len()),
                    });
                }
                (mean, var, None, false)
            }
            BatchNormMode::Training => {
                let data = input.data();
                let mut mean = vec![T::zero(); c];
                let mut var = vec![T::zero(); c];
                let cnt = T::from_f64(count as f64);
                for ch in 0..c {
                    let mut s = T::zero();
                    for item in 0..n {
                        let base = (item * c + ch) * plane;
                        s = data[base..base + plane].iter().fold(s, |a, &v| a + v);
                    }
                    let m = s / cnt;
                    let mut q = T::zero();
                    for item in 0..n {
                        let base = (item * c + ch) * plane;
                        q = data[base..base + plane].iter().fold(q, |a, &v| a + (v - m) * (v - m));
                    }
                    mean[ch] = m;
                    var[ch] = q / cnt;
                }
                let unbiased = if count > 1 {
                    let f = T::from_f64(count as f64 / (count - 1) as f64);
                    var.iter().map(|&v| v * f).collect()
                } else {
                    var.clone()
                };
                let stats = BatchStats {
                    mean: mean.clone(),
                    var: unbiased,
                };
                (mean, var, Some(stats), true)
            }
        };
        let inv_std: Vec<T> = var.iter().map(|&v| T::one() / (v + eps).sqrt()).collect();
        let mut out = input.clone();
        for item in 0..n {
            for ch in 0..c {
                let base = (item * c + ch) * plane;
                for v in &mut out.data_mut()[base..base + plane] {
                    *v = g[ch] * (*v - mean[ch]) * inv_std[ch] + bt[ch];
                }
            }
        }
        let out = out.ensure_finite("batchnorm")?;
        let var_out = self.push(
            out,
            Op::BatchNorm {
                x,
                gamma,
                beta,
                mean,
                inv_std,
                training,
            },
            &[x, gamma, beta],
        );
        Ok((var_out, stats))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let out = ops::activation(self.value(x), ops::Activation::Relu);
        self.push(out, Op::Relu(x), &[x])
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let out = ops::activation(self.value(x), ops::Activation::Sigmoid);
        self.push(out, Op::Sigmoid(x), &[x])
    }

    pub fn permute(&mut self, x: Var, order: &[usize]) -> Result<Var> {
        let out = ops::permute_axes(self.value(x), order)?;
        Ok(self.push(
            out,
            Op::Permute {
                x,
                order: order.to_vec(),
            },
            &[x],
        ))
    }

    pub fn concat_channels(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = ops::concat_channels(self.value(a), self.value(b))?;
        Ok(self.push(out, Op::Concat { a, b }, &[a, b]))
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        if self.value(a).shape() != self.value(b).shape() {
            return Err(TensorError::ShapeMismatch {
                op,
                detail: format!("{:?} vs {:?}", self.value(a).shape(), self.value(b).shape()),
            });
        }
        Ok(())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("add", a, b)?;
        let (va, vb) = (self.value(a), self.value(b));
        let data = va.data().iter().zip(vb.data()).map(|(&x, &y)| x + y).collect();
        let out = Tensor::new(va.shape(), data)?.ensure_finite("add")?;
        Ok(self.push(out, Op::Add(a, b), &[a, b]))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("mul", a, b)?;
        let (va, vb) = (self.value(a), self.value(b));
        let data = va.data().iter().zip(vb.data()).map(|(&x, &y)| x * y).collect();
        let out = Tensor::new(va.shape(), data)?.ensure_finite("mul")?;
        Ok(self.push(out, Op::Mul(a, b), &[a, b]))
    }

    pub fn scale(&mut self, x: Var, factor: T) -> Result<Var> {
        let out = self.value(x).map(|v| v * factor).ensure_finite("scale")?;
        Ok(self.push(out, Op::Scale(x, factor), &[x]))
    }

    pub fn sum(&mut self, x: Var) -> Result<Var> {
        let out = Tensor::scalar(self.value(x).sum()).ensure_finite("sum")?;
        Ok(self.push(out, Op::Sum(x), &[x]))
    }

    /// Records a scalar computed outside the tape together with its
    /// gradient with respect to each input.
    pub fn custom_scalar(&mut self, value: T, local_grads: Vec<(Var, Tensor<T>)>) -> Result<Var> {
        for (v, g) in &local_grads {
            if g.shape() != self.value(*v).shape() {
                return Err(TensorError::ShapeMismatch {
                    op: "custom_scalar",
                    detail: format!("gradient {:?} for value {:?}", g.shape(), self.value(*v).shape()),
                });
            }
        }
        let out = Tensor::scalar(value).ensure_finite("custom_scalar")?;
        let inputs: Vec<Var> = local_grads.iter().map(|(v, _)| *v).collect();
        Ok(self.push(out, Op::Custom(local_grads), &inputs))
    }

    /// Gradients of the scalar `root` with respect to every recorded value.
    pub fn backward(&self, root: Var) -> Result<Gradients<T>> {
        let root_value = self.value(root);
        if root_value.numel() != 1 {
            return Err(TensorError::NonScalarRoot(root_value.shape().to_vec()));
        }
        let mut grads: Vec<Option<Tensor<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        if self.nodes[root.0].requires_grad {
            grads[root.0] = Some(Tensor::full(root_value.shape(), T::one()));
        }
        for i in (0..=root.0).rev() {
            let node = &self.nodes[i];
            if !node.requires_grad || matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(gy) = grads[i].take() else {
                continue;
            };
            self.propagate(node, &gy, &mut grads)?;
        }
        let shapes = self.nodes.iter().map(|n| n.value.shape().to_vec()).collect();
        Ok(Gradients { grads, shapes })
    }

    fn wants(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn accumulate(grads: &mut [Option<Tensor<T>>], v: Var, g: Tensor<T>) {
        match &mut grads[v.0] {
            Some(acc) => {
                for (a, &b) in acc.data_mut().iter_mut().zip(g.data()) {
                    *a = *a + b;
                }
            }
            slot @ None => *slot = Some(g),
        }
    }

    fn propagate(&self, node: &Node<T>, gy: &Tensor<T>, grads: &mut [Option<Tensor<T>>]) -> Result<()> {
        match &node.op {
            Op::Leaf => {}
            Op::Conv2d { x, w, b, spec } => {
                let xv = self.value(*x);
                let (n, c, h, wd) = nchw(xv.shape(), "conv2d backward")?;
                let geo = spec.geometry(h, wd)?;
                let oc = spec.out_channels;
                let (in_item, out_item) = (c * h * wd, oc * geo.out_plane());
                if self.wants(*x) {
                    let mut gx = Tensor::zeros(xv.shape());
                    let wv = self.value(*w).data();
                    for item in 0..n {
                        geo.correlate_adjoint(
                            &gy.data()[item * out_item..(item + 1) * out_item],
                            wv,
                            oc,
                            &mut gx.data_mut()[item * in_item..(item + 1) * in_item],
                        );
                    }
                    Self::accumulate(grads, *x, gx);
                }
                if self.wants(*w) {
                    let mut gw = Tensor::zeros(self.value(*w).shape());
                    for item in 0..n {
                        geo.weight_grad(
                            &xv.data()[item * in_item..(item + 1) * in_item],
                            &gy.data()[item * out_item..(item + 1) * out_item],
                            oc,
                            gw.data_mut(),
                        );
                    }
                    Self::accumulate(grads, *w, gw);
                }
                if let Some(b) = b.filter(|b| self.wants(*b)) {
                    Self::accumulate(grads, b, channel_sums(gy, n, oc, geo.out_plane()));
                }
            }
            Op::ConvTranspose2d { x, w, b, spec } => {
                let xv = self.value(*x);
                let (n, c, h, wd) = nchw(xv.shape(), "conv_transpose2d backward")?;
                let geo = spec.transposed_geometry(h, wd)?;
                let oc = spec.out_channels;
                let (in_item, out_item) = (c * h * wd, oc * geo.in_plane());
                if self.wants(*x) {
                    let mut gx = Tensor::zeros(xv.shape());
                    let wv = self.value(*w).data();
                    for item in 0..n {
                        geo.correlate(
                            &gy.data()[item * out_item..(item + 1) * out_item],
                            wv,
                            c,
                            &mut gx.data_mut()[item * in_item..(item + 1) * in_item],
                        );
                    }
                    Self::accumulate(grads, *x, gx);
                }
                if self.wants(*w) {
                    let mut gw = Tensor::zeros(self.value(*w).shape());
                    for item in 0..n {
                        geo.weight_grad(
                            &gy.data()[item * out_item..(item + 1) * out_item],
                            &xv.data()[item * in_item..(item + 1) * in_item],
                            c,
                            gw.data_mut(),
                        );
                    }
                    Self::accumulate(grads, *w, gw);
                }
                if let Some(b) = b.filter(|b| self.wants(*b)) {
                    Self::accumulate(grads, b, channel_sums(gy, n, oc, geo.in_plane()));
                }
            }
            Op::BatchNorm {
                x,
                gamma,
                beta,
                mean,
                inv_std,
                training,
            } => {
                let xv = self.value(*x);
                let (n, c, h, w) = nchw(xv.shape(), "batchnorm backward")?;
                let plane = h * w;
                let g = self.value(*gamma).data();
                let mut sum_gy = vec![T::zero(); c];
                let mut sum_gy_xhat = vec![T::zero(); c];
                for item in 0..n {
                    for ch in 0..c {
                        let base = (item * c + ch) * plane;
                        for k in base..base + plane {
                            let xhat = (xv.data()[k] - mean[ch]) * inv_std[ch];
                            sum_gy[ch] = sum_gy[ch] + gy.data()[k];
                            sum_gy_xhat[ch] = sum_gy_xhat[ch] + gy.data()[k] * xhat;
                        }
                    }
                }
                if self.wants(*x) {
                    let mut gx = Tensor::zeros(xv.shape());
                    let m = T::from_f64((n * plane) as f64);
                    for item in 0..n {
                        for ch in 0..c {
                            let base = (item * c + ch) * plane;
                            for k in base..base + plane {
                                gx.data_mut()[k] = if *training {
                                    let xhat = (xv.data()[k] - mean[ch]) * inv_std[ch];
                                    g[ch] * inv_std[ch] / m
                                        * (m * gy.data()[k] - sum_gy[ch] - xhat * sum_gy_xhat[ch])
                                } else {
                                    g[ch] * inv_std[ch] * gy.data()[k]
                                };
                            }
                        }
                    }
                    Self::accumulate(grads, *x, gx);
                }
                if self.wants(*gamma) {
                    Self::accumulate(grads, *gamma, Tensor::new(&[c], sum_gy_xhat)?);
                }
                if self.wants(*beta) {
                    Self::accumulate(grads, *beta, Tensor::new(&[c], sum_gy)?);
                }
            }
            Op::Relu(x) => {
                let xv = self.value(*x);
                let data = xv
                    .data()
                    .iter()
                    .zip(gy.data())
                    .map(|(&v, &g)| if v > T::zero() { g } else { T::zero() })
                    .collect();
                Self::accumulate(grads, *x, Tensor::new(xv.shape(), data)?);
            }
            Op::Sigmoid(x) => {
                let data = node
                    .value
                    .data()
                    .iter()
                    .zip(gy.data())
                    .map(|(&s, &g)| g * s * (T::one() - s))
                    .collect();
                Self::accumulate(grads, *x, Tensor::new(self.value(*x).shape(), data)?);
            }
            Op::Permute { x, order } => {
                let gx = ops::permute_axes(gy, &ops::inverse_order(order))?;
                Self::accumulate(grads, *x, gx);
            }
            Op::Concat { a, b } => {
                let ca = nchw(self.value(*a).shape(), "concat backward")?.1;
                let ct = nchw(gy.shape(), "concat backward")?.1;
                if self.wants(*a) {
                    Self::accumulate(grads, *a, gy.channels(0, ca)?);
                }
                if self.wants(*b) {
                    Self::accumulate(grads, *b, gy.channels(ca, ct)?);
                }
            }
            Op::Add(a, b) => {
                for v in [a, b] {
                    if self.wants(*v) {
                        Self::accumulate(grads, *v, gy.clone());
                    }
                }
            }
            Op::Mul(a, b) => {
                let (va, vb) = (self.value(*a), self.value(*b));
                if self.wants(*a) {
                    let d = gy.data().iter().zip(vb.data()).map(|(&g, &y)| g * y).collect();
                    Self::accumulate(grads, *a, Tensor::new(va.shape(), d)?);
                }
                if self.wants(*b) {
                    let d = gy.data().iter().zip(va.data()).map(|(&g, &x)| g * x).collect();
                    Self::accumulate(grads, *b, Tensor::new(vb.shape(), d)?);
                }
            }
            Op::Scale(x, f) => {
                Self::accumulate(grads, *x, gy.map(|g| g * *f));
            }
            Op::Sum(x) => {
                let g = gy.data()[0];
                Self::accumulate(grads, *x, Tensor::full(self.value(*x).shape(), g));
            }
            Op::Custom(inputs) => {
                let g = gy.data()[0];
                for (v, local) in inputs {
                    if self.wants(*v) {
                        Self::accumulate(grads, *v, local.map(|d| d * g));
                    }
                }
            }
        }
        Ok(())
    }
}

fn channel_sums<T: Scalar>(gy: &Tensor<T>, n: usize, c: usize, plane: usize) -> Tensor<T> {
    let mut out = vec![T::zero(); c];
    for item in 0..n {
        for (ch, o) in out.iter_mut().enumerate() {
            let base = (item * c + ch) * plane;
            *o = gy.data()[base..base + plane].iter().fold(*o, |a, &v| a + v);
        }
    }
    Tensor {
        shape: vec![c],
        data: out,
    }
}

/// Result of [`Graph::backward`].
pub struct Gradients<T> {
    grads: Vec<Option<Tensor<T>>>,
    shapes: Vec<Vec<usize>>,
}

impl<T: Scalar> Gradients<T> {
    /// Gradient of `v`; zeros when `v` was unreachable or detached.
    pub fn get(&self, v: Var) -> Tensor<T> {
        self.grads[v.0]
            .clone()
            .unwrap_or_else(|| Tensor::zeros(&self.shapes[v.0]))
    }

    pub fn take(&mut self, v: Var) -> Tensor<T> {
        self.grads[v.0]
            .take()
            .unwrap_or_else(|| Tensor::zeros(&self.shapes[v.0]))
    }
}
