//! Parameter storage and the building-block layers of the network.

use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::NetError;
use crate::tensor::{BatchNormMode, BatchStats, ConvSpec, Graph, Tensor, Var};

/// Whether a tensor is optimised or only tracked (batch-norm running
/// statistics).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParamKind {
    Trainable,
    Buffer,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Param {
    pub name: String,
    pub value: Tensor<f32>,
    pub kind: ParamKind,
    pub frozen: bool,
}

impl Param {
    pub fn is_optimised(&self) -> bool {
        self.kind == ParamKind::Trainable && !self.frozen
    }
}

/// Flat, ordered list of every named tensor in a model.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore {
    params: Vec<Param>,
}

impl ParamStore {
    pub fn add(&mut self, name: String, value: Tensor<f32>, kind: ParamKind) -> usize {
        debug_assert!(self.params.iter().all(|p| p.name != name), "duplicate parameter {name}");
        self.params.push(Param {
            name,
            value,
            kind,
            frozen: false,
        });
        self.params.len() - 1
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn get(&self, i: usize) -> &Param {
        &self.params[i]
    }

    pub fn get_mut(&mut self, i: usize) -> &mut Param {
        &mut self.params[i]
    }

    pub fn iter(&self) -> impl Iterator<Item = &Param> {
        self.params.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Param> {
        self.params.iter_mut()
    }

    pub fn find(&self, name: &str) -> Option<usize> {
        self.params.iter().position(|p| p.name == name)
    }

    /// Element count of trainable, unfrozen tensors.
    pub fn count_trainable(&self) -> usize {
        self.params.iter().filter(|p| p.is_optimised()).map(|p| p.value.numel()).sum()
    }

    /// Freezes every parameter whose name starts with `prefix`; returns how
    /// many tensors matched.
    pub fn set_frozen(&mut self, prefix: &str, frozen: bool) -> usize {
        let mut n = 0;
        for p in self.params.iter_mut().filter(|p| p.name.starts_with(prefix)) {
            p.frozen = frozen;
            n += 1;
        }
        n
    }

    /// Indices of the tensors an optimiser should update.
    pub fn optimised_indices(&self) -> Vec<usize> {
        (0..self.params.len()).filter(|&i| self.params[i].is_optimised()).collect()
    }
}

/// Registers parameters under a dotted name prefix with seeded
/// initialisation.
pub struct Builder<'a> {
    pub store: &'a mut ParamStore,
    pub rng: &'a mut ChaCha8Rng,
    pub bn_eps: f64,
    pub bn_momentum: f64,
}

impl Builder<'_> {
    /// He-normal weights (`std = √(2 / fan_in)`), zero bias.
    pub fn conv(&mut self, name: &str, spec: ConvSpec) -> Conv {
        let shape = spec.weight_shape();
        let fan_in = shape[1] * shape[2] * shape[3];
        let weight = self.normal(&shape, (2.0 / fan_in as f64).sqrt());
        let weight = self.store.add(format!("{name}.weight"), weight, ParamKind::Trainable);
        let bias = spec
            .bias
            .then(|| self.store.add(format!("{name}.bias"), Tensor::zeros(&[spec.out_channels]), ParamKind::Trainable));
        Conv { spec, weight, bias }
    }

    /// Transposed conv; weights are `in × out × kh × kw`.
    pub fn conv_transpose(&mut self, name: &str, spec: ConvSpec) -> ConvTranspose {
        let shape = spec.transposed_weight_shape();
        let fan_in = spec.in_channels * spec.kernel.0 * spec.kernel.1;
        let weight = self.normal(&shape, (2.0 / fan_in as f64).sqrt());
        let weight = self.store.add(format!("{name}.weight"), weight, ParamKind::Trainable);
        let bias = spec
            .bias
            .then(|| self.store.add(format!("{name}.bias"), Tensor::zeros(&[spec.out_channels]), ParamKind::Trainable));
        ConvTranspose { spec, weight, bias }
    }

    pub fn batchnorm(&mut self, name: &str, channels: usize) -> BatchNorm {
        let c = [channels];
        BatchNorm {
            gamma: self.store.add(format!("{name}.gamma"), Tensor::full(&c, 1.0), ParamKind::Trainable),
            beta: self.store.add(format!("{name}.beta"), Tensor::zeros(&c), ParamKind::Trainable),
            running_mean: self.store.add(format!("{name}.running_mean"), Tensor::zeros(&c), ParamKind::Buffer),
            running_var: self.store.add(format!("{name}.running_var"), Tensor::full(&c, 1.0), ParamKind::Buffer),
            eps: self.bn_eps as f32,
            momentum: self.bn_momentum as f32,
        }
    }

    pub fn conv_bn(&mut self, name: &str, spec: ConvSpec) -> ConvBn {
        let out = spec.out_channels;
        ConvBn {
            conv: self.conv(&format!("{name}.conv"), spec.no_bias()),
            bn: self.batchnorm(&format!("{name}.bn"), out),
        }
    }

    pub fn basic_block(&mut self, name: &str, input: usize, output: usize, stride: usize) -> BasicBlock {
        let k3 = |i, o, s| ConvSpec::new(i, o, 3).stride(s, s).padding(1, 1);
        let shortcut = (input != output || stride != 1)
            .then(|| self.conv_bn(&format!("{name}.shortcut"), ConvSpec::new(input, output, 1).stride(stride, stride)));
        let first = self.conv_bn(&format!("{name}.conv1"), k3(input, output, stride));
        let second = self.conv_bn(&format!("{name}.conv2"), k3(output, output, 1));
        // The residual branch starts switched off, so a fresh block is the
        // identity (or its projection).
        self.store.get_mut(second.bn.gamma).value = Tensor::zeros(&[output]);
        BasicBlock {
            first,
            second,
            shortcut,
        }
    }

    fn normal(&mut self, shape: &[usize], std: f64) -> Tensor<f32> {
        let dist = Normal::new(0.0, std).expect("finite std");
        let rng = &mut *self.rng;
        Tensor::from_fn(shape, |_| dist.sample(rng) as f32)
    }
}

/// One forward evaluation: graph, parameter handles and batch-norm
/// statistics observed along the way.
pub struct Forward<'a> {
    pub graph: Graph<f32>,
    store: &'a ParamStore,
    vars: Vec<Option<Var>>,
    training: bool,
    bn_stats: Vec<(usize, usize, BatchStats<f32>)>,
}

impl<'a> Forward<'a> {
    /// `training` selects batch statistics and records the backward tape.
    pub fn new(store: &'a ParamStore, training: bool) -> Self {
        Self {
            graph: if training { Graph::new() } else { Graph::inference() },
            store,
            vars: vec![None; store.len()],
            training,
            bn_stats: Vec::new(),
        }
    }

    pub fn is_training(&self) -> bool {
        self.training
    }

    /// Graph handle for parameter `i`, created on first use.
    pub fn param(&mut self, i: usize) -> Var {
        if let Some(v) = self.vars[i] {
            return v;
        }
        let p = self.store.get(i);
        let v = self.graph.leaf(p.value.clone(), p.is_optimised());
        self.vars[i] = Some(v);
        v
    }

    /// Parameters that received a graph handle, as `(store index, var)`.
    pub fn used_params(&self) -> Vec<(usize, Var)> {
        self.vars.iter().enumerate().filter_map(|(i, v)| v.map(|v| (i, v))).collect()
    }

    /// `(running_mean index, running_var index, batch stats)` per
    /// batch-norm evaluated in training mode.
    pub fn take_bn_stats(&mut self) -> Vec<(usize, usize, BatchStats<f32>)> {
        std::mem::take(&mut self.bn_stats)
    }

    pub fn input(&mut self, t: Tensor<f32>) -> Var {
        self.graph.constant(t)
    }

    pub fn value(&self, v: Var) -> &Tensor<f32> {
        self.graph.value(v)
    }
}

#[derive(Clone, Debug)]
pub struct Conv {
    pub spec: ConvSpec,
    pub weight: usize,
    pub bias: Option<usize>,
}

impl Conv {
    pub fn forward(&self, f: &mut Forward<'_>, x: Var) -> Result<Var, NetError> {
        let w = f.param(self.weight);
        let b = self.bias.map(|b| f.param(b));
        Ok(f.graph.conv2d(x, w, b, &self.spec)?)
    }
}

#[derive(Clone, Debug)]
pub struct ConvTranspose {
    pub spec: ConvSpec,
    pub weight: usize,
    pub bias: Option<usize>,
}

impl ConvTranspose {
    pub fn forward(&self, f: &mut Forward<'_>, x: Var) -> Result<Var, NetError> {
        let w = f.param(self.weight);
        let b = self.bias.map(|b| f.param(b));
        Ok(f.graph.conv_transpose2d(x, w, b, &self.spec)?)
    }
}

#[derive(Clone, Debug)]
pub struct BatchNorm {
    pub gamma: usize,
    pub beta: usize,
    pub running_mean: usize,
    pub running_var: usize,
    pub eps: f32,
    pub momentum: f32,
}

impl BatchNorm {
    pub fn forward(&self, f: &mut Forward<'_>, x: Var) -> Result<Var, NetError> {
        let gamma = f.param(self.gamma);
        let beta = f.param(self.beta);
        let mode = if f.training {
            BatchNormMode::Training
        } else {
            BatchNormMode::Inference {
                mean: f.store.get(self.running_mean).value.data().to_vec(),
                var: f.store.get(self.running_var).value.data().to_vec(),
            }
        };
        let (y, stats) = f.graph.batchnorm(x, gamma, beta, mode, self.eps)?;
        if let Some(s) = stats {
            f.bn_stats.push((self.running_mean, self.running_var, s));
        }
        Ok(y)
    }
}

/// Convolution (no bias) followed by batch norm.
#[derive(Clone, Debug)]
pub struct ConvBn {
    pub conv: Conv,
    pub bn: BatchNorm,
}

impl ConvBn {
    pub fn forward(&self, f: &mut Forward<'_>, x: Var) -> Result<Var, NetError> {
        let y = self.conv.forward(f, x)?;
        self.bn.forward(f, y)
    }

    pub fn forward_relu(&self, f: &mut Forward<'_>, x: Var) -> Result<Var, NetError> {
        let y = self.forward(f, x)?;
        Ok(f.graph.relu(y))
    }
}

#[derive(Clone, Debug)]
pub struct BasicBlock {
    pub first: ConvBn,
    pub second: ConvBn,
    pub shortcut: Option<ConvBn>,
}

impl BasicBlock {
    pub fn forward(&self, f: &mut Forward<'_>, x: Var) -> Result<Var, NetError> {
        let y = self.first.forward_relu(f, x)?;
        let y = self.second.forward(f, y)?;
        let skip = match &self.shortcut {
            Some(s) => s.forward(f, x)?,
            None => x,
        };
        let sum = f.graph.add(y, skip)?;
        Ok(f.graph.relu(sum))
    }
}

/// Exponential moving average of batch statistics into the running
/// buffers: `running ← (1 − m)·running + m·batch`.
pub fn apply_bn_stats(store: &mut ParamStore, stats: &[(usize, usize, BatchStats<f32>)], momentum: f32) {
    for (mi, vi, s) in stats {
        for (r, b) in store.get_mut(*mi).value.data_mut().iter_mut().zip(&s.mean) {
            *r = (1.0 - momentum) * *r + momentum * b;
        }
        for (r, b) in store.get_mut(*vi).value.data_mut().iter_mut().zip(&s.var) {
            *r = (1.0 - momentum) * *r + momentum * b;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn builder_store(f: impl FnOnce(&mut Builder<'_>)) -> ParamStore {
        let mut store = ParamStore::default();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut b = Builder {
            store: &mut store,
            rng: &mut rng,
            bn_eps: 1e-5,
            bn_momentum: 0.1,
        };
        f(&mut b);
        store
    }

    #[test]
    fn single_conv_count() {
        let store = builder_store(|b| {
            b.conv("c", ConvSpec::new(2, 4, 3));
        });
        assert_eq!(store.count_trainable(), 76);
    }

    #[test]
    fn buffers_and_frozen_are_not_counted() {
        let mut store = builder_store(|b| {
            b.conv_bn("a", ConvSpec::new(2, 4, 3));
            b.conv("b", ConvSpec::new(4, 1, 1));
        });
        assert_eq!(store.count_trainable(), 72 + 8 + 5);
        assert_eq!(store.set_frozen("a.", true), 5);
        assert_eq!(store.count_trainable(), 5);
        assert_eq!(store.optimised_indices().len(), 2);
    }

    #[test]
    fn running_stats_update() {
        let mut store = builder_store(|b| {
            b.batchnorm("bn", 2);
        });
        let stats = BatchStats {
            mean: vec![1.0, 2.0],
            var: vec![3.0, 5.0],
        };
        apply_bn_stats(&mut store, &[(2, 3, stats)], 0.1);
        assert_eq!(store.get(2).value.data(), &[0.1, 0.2]);
        assert!((store.get(3).value.data()[1] - 1.4).abs() < 1e-6);
    }
}
