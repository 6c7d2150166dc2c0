//! Forward operators. Each accepts `C×H×W` or `N×C×H×W` input.

use super::kernels::Geometry;
use super::{Result, Scalar, Tensor, TensorError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct ConvSpec {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: (usize, usize),
    pub stride: (usize, usize),
    pub padding: (usize, usize),
    pub dilation: (usize, usize),
    pub bias: bool,
}

impl ConvSpec {
    /// Square kernel, unit stride and dilation, no padding, with bias.
    pub fn new(in_channels: usize, out_channels: usize, kernel: usize) -> Self {
        Self {
            in_channels,
            out_channels,
            kernel: (kernel, kernel),
            stride: (1, 1),
            padding: (0, 0),
            dilation: (1, 1),
            bias: true,
        }
    }

    pub fn kernel2(mut self, kh: usize, kw: usize) -> Self {
        self.kernel = (kh, kw);
        self
    }

    pub fn stride(mut self, sh: usize, sw: usize) -> Self {
        self.stride = (sh, sw);
        self
    }

    pub fn padding(mut self, ph: usize, pw: usize) -> Self {
        self.padding = (ph, pw);
        self
    }

    pub fn dilation(mut self, dh: usize, dw: usize) -> Self {
        self.dilation = (dh, dw);
        self
    }

    pub fn no_bias(mut self) -> Self {
        self.bias = false;
        self
    }

    /// `out_channels × in_channels × kh × kw`.
    pub fn weight_shape(&self) -> [usize; 4] {
        [self.out_channels, self.in_channels, self.kernel.0, self.kernel.1]
    }

    /// `in_channels × out_channels × kh × kw` for the transposed operator.
    pub fn transposed_weight_shape(&self) -> [usize; 4] {
        [self.in_channels, self.out_channels, self.kernel.0, self.kernel.1]
    }

    fn check_nonzero(&self) -> Result<()> {
        let (kh, kw) = self.kernel;
        let (sh, sw) = self.stride;
        let (dh, dw) = self.dilation;
        if [kh, kw, sh, sw, dh, dw, self.in_channels, self.out_channels].contains(&0) {
            return Err(TensorError::ShapeMismatch {
                op: "conv spec",
                detail: format!("zero-sized kernel, stride, dilation or channel count in {self:?}"),
            });
        }
        Ok(())
    }

    /// `floor((H + 2p − d·(k−1) − 1)/s) + 1` per axis.
    pub fn output_size(&self, h: usize, w: usize) -> Result<(usize, usize)> {
        self.check_nonzero()?;
        let axis = |n: usize, k: usize, s: usize, p: usize, d: usize| -> Option<usize> {
            let span = n as isize + 2 * p as isize - (d * (k - 1)) as isize - 1;
            (span >= 0).then(|| span as usize / s + 1)
        };
        match (
            axis(h, self.kernel.0, self.stride.0, self.padding.0, self.dilation.0),
            axis(w, self.kernel.1, self.stride.1, self.padding.1, self.dilation.1),
        ) {
            (Some(oh), Some(ow)) => Ok((oh, ow)),
            _ => Err(TensorError::EmptyOutput {
                op: "conv2d",
                input: vec![self.in_channels, h, w],
            }),
        }
    }

    /// `(H−1)·s − 2p + d·(k−1) + 1` per axis.
    pub fn transposed_output_size(&self, h: usize, w: usize) -> Result<(usize, usize)> {
        self.check_nonzero()?;
        let axis = |n: usize, k: usize, s: usize, p: usize, d: usize| -> isize {
            (n as isize - 1) * s as isize - 2 * p as isize + (d * (k - 1)) as isize + 1
        };
        let oh = axis(h, self.kernel.0, self.stride.0, self.padding.0, self.dilation.0);
        let ow = axis(w, self.kernel.1, self.stride.1, self.padding.1, self.dilation.1);
        if oh < 1 || ow < 1 || h == 0 || w == 0 {
            return Err(TensorError::EmptyOutput {
                op: "conv_transpose2d",
                input: vec![self.in_channels, h, w],
            });
        }
        Ok((oh as usize, ow as usize))
    }

    /// Geometry of the forward correlation on an `H×W` input.
    pub(crate) fn geometry(&self, h: usize, w: usize) -> Result<Geometry> {
        let (out_h, out_w) = self.output_size(h, w)?;
        Ok(self.geometry_for(self.in_channels, h, w, out_h, out_w))
    }

    /// Geometry of the correlation whose adjoint is the transposed operator
    /// applied to an `H×W` input.
    pub(crate) fn transposed_geometry(&self, h: usize, w: usize) -> Result<Geometry> {
        let (oh, ow) = self.transposed_output_size(h, w)?;
        Ok(self.geometry_for(self.out_channels, oh, ow, h, w))
    }

    fn geometry_for(&self, channels: usize, in_h: usize, in_w: usize, out_h: usize, out_w: usize) -> Geometry {
        Geometry {
            channels,
            in_h,
            in_w,
            kh: self.kernel.0,
            kw: self.kernel.1,
            sh: self.stride.0,
            sw: self.stride.1,
            ph: self.padding.0,
            pw: self.padding.1,
            dh: self.dilation.0,
            dw: self.dilation.1,
            out_h,
            out_w,
        }
    }
}

/// Splits a rank-3 or rank-4 shape into `(N, C, H, W)`.
pub(crate) fn nchw(shape: &[usize], op: &'static str) -> Result<(usize, usize, usize, usize)> {
    match *shape {
        [c, h, w] => Ok((1, c, h, w)),
        [n, c, h, w] => Ok((n, c, h, w)),
        _ => Err(TensorError::ShapeMismatch {
            op,
            detail: format!("expected C×H×W or N×C×H×W, got {shape:?}"),
        }),
    }
}

/// Shape with the same rank as `like`.
pub(crate) fn with_rank(like: &[usize], n: usize, c: usize, h: usize, w: usize) -> Vec<usize> {
    if like.len() == 3 {
        vec![c, h, w]
    } else {
        vec![n, c, h, w]
    }
}

fn check_tensor_shape<T: Scalar>(op: &'static str, what: &str, t: &Tensor<T>, expected: &[usize]) -> Result<()> {
    if t.shape() != expected {
        return Err(TensorError::ShapeMismatch {
            op,
            detail: format!("{what} has shape {:?}, expected {expected:?}", t.shape()),
        });
    }
    Ok(())
}

pub(crate) fn check_conv_args<T: Scalar>(
    op: &'static str,
    input: &Tensor<T>,
    spec: &ConvSpec,
    weights: &Tensor<T>,
    weight_shape: [usize; 4],
    bias: Option<&Tensor<T>>,
    bias_len: usize,
) -> Result<(usize, usize, usize, usize)> {
    let (n, c, h, w) = nchw(input.shape(), op)?;
    if c != spec.in_channels {
        return Err(TensorError::ShapeMismatch {
            op,
            detail: format!("input has {c} channels, spec expects {}", spec.in_channels),
        });
    }
    check_tensor_shape(op, "weights", weights, &weight_shape)?;
    match (spec.bias, bias) {
        (true, Some(b)) => check_tensor_shape(op, "bias", b, &[bias_len])?,
        (false, None) => {}
        (true, None) => {
            return Err(TensorError::ShapeMismatch {
                op,
                detail: "spec declares a bias but none was given".into(),
            })
        }
        (false, Some(_)) => {
            return Err(TensorError::ShapeMismatch {
                op,
                detail: "bias given for a bias-free spec".into(),
            })
        }
    }
    Ok((n, c, h, w))
}

fn add_bias<T: Scalar>(out: &mut [T], bias: Option<&Tensor<T>>, n: usize, c: usize, plane: usize) {
    if let Some(b) = bias {
        for item in 0..n {
            for (ch, &bv) in b.data().iter().enumerate().take(c) {
                let base = (item * c + ch) * plane;
                for v in &mut out[base..base + plane] {
                    *v = *v + bv;
                }
            }
        }
    }
}

/// Zero-padded 2-D cross-correlation.
pub fn conv2d<T: Scalar>(
    input: &Tensor<T>,
    spec: &ConvSpec,
    weights: &Tensor<T>,
    bias: Option<&Tensor<T>>,
) -> Result<Tensor<T>> {
    let (n, _, h, w) = check_conv_args("conv2d", input, spec, weights, spec.weight_shape(), bias, spec.out_channels)?;
    let geo = spec.geometry(h, w)?;
    let oc = spec.out_channels;
    let in_item = spec.in_channels * h * w;
    let out_item = oc * geo.out_plane();
    let mut out = vec![T::zero(); n * out_item];
    for item in 0..n {
        geo.correlate(
            &input.data()[item * in_item..(item + 1) * in_item],
            weights.data(),
            oc,
            &mut out[item * out_item..(item + 1) * out_item],
        );
    }
    add_bias(&mut out, bias, n, oc, geo.out_plane());
    Tensor::new(&with_rank(input.shape(), n, oc, geo.out_h, geo.out_w), out)?.ensure_finite("conv2d")
}

/// Transposed convolution, the adjoint of [`conv2d`] for the same spec
/// with channel roles exchanged. Weights are `in × out × kh × kw`.
pub fn conv_transpose2d<T: Scalar>(
    input: &Tensor<T>,
    spec: &ConvSpec,
    weights: &Tensor<T>,
    bias: Option<&Tensor<T>>,
) -> Result<Tensor<T>> {
    let (n, _, h, w) = check_conv_args(
        "conv_transpose2d",
        input,
        spec,
        weights,
        spec.transposed_weight_shape(),
        bias,
        spec.out_channels,
    )?;
    let geo = spec.transposed_geometry(h, w)?;
    let oc = spec.out_channels;
    let in_item = spec.in_channels * h * w;
    let out_item = oc * geo.in_plane();
    let mut out = vec![T::zero(); n * out_item];
    for item in 0..n {
        geo.correlate_adjoint(
            &input.data()[item * in_item..(item + 1) * in_item],
            weights.data(),
            spec.in_channels,
            &mut out[item * out_item..(item + 1) * out_item],
        );
    }
    add_bias(&mut out, bias, n, oc, geo.in_plane());
    Tensor::new(&with_rank(input.shape(), n, oc, geo.in_h, geo.in_w), out)?.ensure_finite("conv_transpose2d")
}

/// Inference-form batch normalization with fixed per-channel statistics.
pub fn batchnorm2d<T: Scalar>(
    input: &Tensor<T>,
    mean: &[T],
    var: &[T],
    gamma: &[T],
    beta: &[T],
    eps: T,
) -> Result<Tensor<T>> {
    let (n, c, h, w) = nchw(input.shape(), "batchnorm2d")?;
    for (name, len) in [("mean", mean.len()), ("var", var.len()), ("gamma", gamma.len()), ("beta", beta.len())] {
        if len != c {
            return Err(TensorError::ShapeMismatch {
                op: "batchnorm2d",
                detail: format!("{name} has {len} entries for {c} channels"),
            });
        }
    }
    let plane = h * w;
    let mut out = input.clone();
    for item in 0..n {
        for ch in 0..c {
            let scale = gamma[ch] / (var[ch] + eps).sqrt();
            let base = (item * c + ch) * plane;
            for v in &mut out.data_mut()[base..base + plane] {
                *v = scale * (*v - mean[ch]) + beta[ch];
            }
        }
    }
    out.ensure_finite("batchnorm2d")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Sigmoid,
}

pub(crate) fn sigmoid<T: Scalar>(x: T) -> T {
    T::one() / (T::one() + (-x).exp())
}

pub fn activation<T: Scalar>(input: &Tensor<T>, kind: Activation) -> Tensor<T> {
    match kind {
        Activation::Relu => input.map(|v| v.max(T::zero())),
        Activation::Sigmoid => input.map(sigmoid),
    }
}

fn validate_order(order: &[usize], rank: usize) -> Result<()> {
    let mut seen = vec![false; rank];
    let ok = order.len() == rank
        && order.iter().all(|&a| {
            if a < rank && !seen[a] {
                seen[a] = true;
                true
            } else {
                false
            }
        });
    if ok {
        Ok(())
    } else {
        Err(TensorError::InvalidPermutation {
            order: order.to_vec(),
            rank,
        })
    }
}

/// Output axis `i` is input axis `order[i]`.
pub fn permute_axes<T: Scalar>(input: &Tensor<T>, order: &[usize]) -> Result<Tensor<T>> {
    let rank = input.ndim();
    validate_order(order, rank)?;
    let in_shape = input.shape();
    let mut in_strides = vec![1usize; rank];
    for ax in (0..rank.saturating_sub(1)).rev() {
        in_strides[ax] = in_strides[ax + 1] * in_shape[ax + 1];
    }
    let out_shape: Vec<usize> = order.iter().map(|&a| in_shape[a]).collect();
    let strides: Vec<usize> = order.iter().map(|&a| in_strides[a]).collect();
    let src = input.data();
    let mut data = Vec::with_capacity(src.len());
    let mut idx = vec![0usize; rank];
    let mut off = 0usize;
    for _ in 0..src.len() {
        data.push(src[off]);
        for ax in (0..rank).rev() {
            idx[ax] += 1;
            off += strides[ax];
            if idx[ax] < out_shape[ax] {
                break;
            }
            off -= strides[ax] * out_shape[ax];
            idx[ax] = 0;
        }
    }
    Tensor::new(&out_shape, data)
}

pub(crate) fn inverse_order(order: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; order.len()];
    for (i, &a) in order.iter().enumerate() {
        inv[a] = i;
    }
    inv
}

/// Concatenates along the channel axis: channels of `a`, then of `b`.
pub fn concat_channels<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    if a.ndim() != b.ndim() {
        return Err(TensorError::ShapeMismatch {
            op: "concat_channels",
            detail: format!("rank {:?} vs {:?}", a.shape(), b.shape()),
        });
    }
    let (na, ca, ha, wa) = nchw(a.shape(), "concat_channels")?;
    let (nb, cb, hb, wb) = nchw(b.shape(), "concat_channels")?;
    if (na, ha, wa) != (nb, hb, wb) {
        return Err(TensorError::ShapeMismatch {
            op: "concat_channels",
            detail: format!("{:?} vs {:?}", a.shape(), b.shape()),
        });
    }
    let plane = ha * wa;
    let mut data = Vec::with_capacity(a.numel() + b.numel());
    for item in 0..na {
        data.extend_from_slice(&a.data()[item * ca * plane..(item + 1) * ca * plane]);
        data.extend_from_slice(&b.data()[item * cb * plane..(item + 1) * cb * plane]);
    }
    Tensor::new(&with_rank(a.shape(), na, ca + cb, ha, wa), data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor<f64> {
        Tensor::from_fn(shape, |_| rng.random_range(-1.0..1.0))
    }

    /// Six nested loops straight from the definition.
    fn direct_conv(x: &Tensor<f64>, spec: &ConvSpec, wt: &Tensor<f64>, b: Option<&Tensor<f64>>) -> Tensor<f64> {
        let [c, h, w] = [x.shape()[0], x.shape()[1], x.shape()[2]];
        let (oh, ow) = spec.output_size(h, w).unwrap();
        let mut out = Tensor::zeros(&[spec.out_channels, oh, ow]);
        for o in 0..spec.out_channels {
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut acc = b.map_or(0.0, |b| b.data()[o]);
                    for ci in 0..c {
                        for ky in 0..spec.kernel.0 {
                            for kx in 0..spec.kernel.1 {
                                let iy = (oy * spec.stride.0 + ky * spec.dilation.0) as isize - spec.padding.0 as isize;
                                let ix = (ox * spec.stride.1 + kx * spec.dilation.1) as isize - spec.padding.1 as isize;
                                if iy >= 0 && ix >= 0 && (iy as usize) < h && (ix as usize) < w {
                                    acc += wt.get(&[o, ci, ky, kx]) * x.get(&[ci, iy as usize, ix as usize]);
                                }
                            }
                        }
                    }
                    out.set(&[o, oy, ox], acc);
                }
            }
        }
        out
    }

    #[test]
    fn identity_kernel_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = random(&[1, 5, 7], &mut rng);
        let spec = ConvSpec::new(1, 1, 1);
        let y = conv2d(&x, &spec, &Tensor::full(&[1, 1, 1, 1], 1.0), Some(&Tensor::zeros(&[1]))).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn ones_kernel_counts_overlap() {
        let x = Tensor::<f32>::full(&[1, 4, 4], 1.0);
        let spec = ConvSpec::new(1, 1, 3).padding(1, 1).no_bias();
        let y = conv2d(&x, &spec, &Tensor::full(&[1, 1, 3, 3], 1.0), None).unwrap();
        assert_eq!(y.shape(), &[1, 4, 4]);
        assert_eq!(y.get(&[0, 0, 0]), 4.0);
        assert_eq!(y.get(&[0, 3, 3]), 4.0);
        assert_eq!(y.get(&[0, 1, 2]), 9.0);
        assert_eq!(y.get(&[0, 0, 1]), 6.0);
    }

    #[test]
    fn matches_direct_convolution() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for (stride, pad, dil) in [(1, 1, 1), (2, 1, 1), (1, 2, 2), (2, 0, 1)] {
            let spec = ConvSpec::new(2, 3, 3).stride(stride, stride).padding(pad, pad).dilation(dil, dil);
            let x = random(&[2, 8, 8], &mut rng);
            let wt = random(&spec.weight_shape(), &mut rng);
            let b = random(&[3], &mut rng);
            let got = conv2d(&x, &spec, &wt, Some(&b)).unwrap();
            let want = direct_conv(&x, &spec, &wt, Some(&b));
            assert_eq!(got.shape(), want.shape());
            for (g, w) in got.data().iter().zip(want.data()) {
                assert!((g - w).abs() <= 1e-6 * w.abs().max(1.0), "{g} vs {w}");
            }
        }
    }

    #[test]
    fn banded_im2col_matches_direct() {
        // Large enough that the column buffer is split into several bands.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let spec = ConvSpec::new(64, 2, 3).padding(1, 1);
        let x = random(&[64, 300, 40], &mut rng);
        let wt = random(&spec.weight_shape(), &mut rng);
        assert!(spec.geometry(300, 40).unwrap().band_rows() < 300);
        let got = conv2d(&x, &spec, &wt, Some(&Tensor::zeros(&[2]))).unwrap();
        let want = direct_conv(&x, &spec, &wt, None);
        for (g, w) in got.data().iter().zip(want.data()) {
            assert!((g - w).abs() <= 1e-9 * w.abs().max(1.0));
        }
    }

    #[test]
    fn conv_errors() {
        let x = Tensor::<f32>::zeros(&[2, 4, 4]);
        let spec = ConvSpec::new(3, 1, 3);
        assert!(matches!(
            conv2d(&x, &spec, &Tensor::zeros(&spec.weight_shape()), Some(&Tensor::zeros(&[1]))),
            Err(TensorError::ShapeMismatch { .. })
        ));
        let spec = ConvSpec::new(2, 1, 5);
        assert!(matches!(
            conv2d(&x, &spec, &Tensor::zeros(&spec.weight_shape()), Some(&Tensor::zeros(&[1]))),
            Err(TensorError::EmptyOutput { .. })
        ));
    }

    #[test]
    fn transposed_unit_kernel_expands_blocks() {
        let x = Tensor::<f32>::full(&[1, 1, 1], 3.5);
        let spec = ConvSpec::new(1, 1, 2).stride(2, 2).no_bias();
        let y = conv_transpose2d(&x, &spec, &Tensor::full(&[1, 1, 2, 2], 1.0), None).unwrap();
        assert_eq!(y.shape(), &[1, 2, 2]);
        assert!(y.data().iter().all(|&v| v == 3.5));

        let x = Tensor::<f32>::from_fn(&[1, 3, 2], |i| (i[1] * 2 + i[2]) as f32);
        let spec = ConvSpec::new(1, 1, 1).no_bias();
        let y = conv_transpose2d(&x, &spec, &Tensor::full(&[1, 1, 1, 1], 1.0), None).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn transposed_is_adjoint() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for (k, s, p, d, side) in [(3, 1, 1, 1, 9), (2, 2, 0, 1, 8), (3, 2, 1, 1, 9), (3, 1, 2, 2, 9)] {
            // conv2d: 3 channels -> 2 channels; its adjoint maps 2 -> 3.
            let conv = ConvSpec::new(3, 2, k).stride(s, s).padding(p, p).dilation(d, d).no_bias();
            let tconv = ConvSpec { in_channels: 2, out_channels: 3, ..conv };
            let wt = random(&conv.weight_shape(), &mut rng);
            let y = random(&[3, side, side], &mut rng);
            let cy = conv2d(&y, &conv, &wt, None).unwrap();
            let x = random(cy.shape(), &mut rng);
            let tx = conv_transpose2d(&x, &tconv, &wt, None).unwrap();
            assert_eq!(tx.shape(), y.shape());
            let lhs = tx.dot(&y);
            let rhs = x.dot(&cy);
            assert!((lhs - rhs).abs() < 1e-9 * lhs.abs().max(1.0), "{lhs} vs {rhs}");
        }
    }

    #[test]
    fn batchnorm_forms() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = random(&[2, 3, 3], &mut rng);
        let id = batchnorm2d(&x, &[0.0; 2], &[1.0; 2], &[1.0; 2], &[0.0; 2], 0.0).unwrap();
        assert_eq!(id, x);
        let flat = batchnorm2d(&x, &[0.3; 2], &[2.0; 2], &[0.0; 2], &[0.7, -0.2], 1e-5).unwrap();
        assert!(flat.data()[..9].iter().all(|&v| v == 0.7));
        assert!(flat.data()[9..].iter().all(|&v| v == -0.2));
        let (m, v, g, b) = ([0.1, -0.4], [0.5, 2.5], [1.3, -0.7], [0.05, 0.9]);
        let y = batchnorm2d(&x, &m, &v, &g, &b, 1e-3).unwrap();
        for (i, (&yv, &xv)) in y.data().iter().zip(x.data()).enumerate() {
            let c = i / 9;
            assert_eq!(yv, g[c] / (v[c] + 1e-3).sqrt() * (xv - m[c]) + b[c]);
        }
        assert!(batchnorm2d(&x, &[0.0], &[1.0; 2], &[1.0; 2], &[0.0; 2], 0.0).is_err());
    }

    #[test]
    fn activations() {
        let x = Tensor::<f64>::new(&[1, 1, 3], vec![-3.0, 2.0, 0.0]).unwrap();
        assert_eq!(activation(&x, Activation::Relu).data(), &[0.0, 2.0, 0.0]);
        assert_eq!(activation(&x, Activation::Sigmoid).data()[2], 0.5);
        for v in [-7.5f64, -1.0, 0.3, 4.0] {
            assert!((sigmoid(v) + sigmoid(-v) - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn permute_index_formula() {
        let x = Tensor::<f32>::from_fn(&[2, 3, 4], |i| (i[0] * 100 + i[1] * 10 + i[2]) as f32);
        let y = permute_axes(&x, &[2, 0, 1]).unwrap();
        assert_eq!(y.shape(), &[4, 2, 3]);
        for a in 0..4 {
            for b in 0..2 {
                for c in 0..3 {
                    assert_eq!(y.get(&[a, b, c]), x.get(&[b, c, a]));
                }
            }
        }
        assert_eq!(permute_axes(&x, &[0, 1, 2]).unwrap(), x);
        let back = permute_axes(&y, &inverse_order(&[2, 0, 1])).unwrap();
        assert_eq!(back, x);
        assert!(permute_axes(&x, &[0, 0, 1]).is_err());
        assert!(permute_axes(&x, &[0, 1]).is_err());
    }

    #[test]
    fn concat_layout() {
        let a = Tensor::<f32>::from_fn(&[3, 2, 2], |i| (i[0] * 4 + i[1] * 2 + i[2]) as f32);
        let b = Tensor::<f32>::from_fn(&[5, 2, 2], |i| 100.0 + (i[0] * 4 + i[1] * 2 + i[2]) as f32);
        let y = concat_channels(&a, &b).unwrap();
        assert_eq!(y.shape(), &[8, 2, 2]);
        for c in 0..8 {
            for i in 0..2 {
                for j in 0..2 {
                    let want = if c < 3 { a.get(&[c, i, j]) } else { b.get(&[c - 3, i, j]) };
                    assert_eq!(y.get(&[c, i, j]), want);
                }
            }
        }
        assert_eq!(y.channels(0, 3).unwrap(), a);
        let empty = Tensor::<f32>::zeros(&[0, 2, 2]);
        assert_eq!(concat_channels(&a, &empty).unwrap(), a);
        assert!(concat_channels(&a, &Tensor::zeros(&[1, 2, 3])).is_err());
    }
}
