use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::config::OptimizerConfig;
use super::preprocess::Sample;
use super::HarnessError;
use crate::loss::{detection_loss, LossConfig, LossValue, TargetMaps};
use crate::net::{apply_bn_stats, Model};
use crate::tensor::{adam_update, AdamState};
use crate::Tensor;

/// Stacks samples into `N×…` batches.
pub fn batch_inputs(samples: &[&Sample]) -> Result<(Tensor<f32>, Tensor<f32>, TargetMaps<f32>), HarnessError> {
    let cam: Vec<_> = samples.iter().map(|s| s.camera.clone()).collect();
    let rad: Vec<_> = samples.iter().map(|s| s.radar.clone()).collect();
    let tgt: Vec<_> = samples.iter().map(|s| s.targets.clone()).collect();
    Ok((Tensor::stack(&cam)?, Tensor::stack(&rad)?, TargetMaps::stack(&tgt)?))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StepRecord {
    pub step: usize,
    pub epoch: usize,
    pub learning_rate: f64,
    pub loss: f64,
    pub focal: f64,
    pub regression: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub learning_rate: f64,
    pub steps: usize,
    pub mean_loss: f64,
}

/// Adam state, schedule and shuffling for one training run.
pub struct Trainer {
    opt: OptimizerConfig,
    loss: LossConfig,
    adam: AdamState<f32>,
    indices: Vec<usize>,
    rng: ChaCha8Rng,
    step: usize,
    epoch: usize,
    momentum: f32,
}

impl Trainer {
    pub fn new(model: &Model, opt: &OptimizerConfig, loss: &LossConfig, seed: u64) -> Self {
        let indices = model.store().optimised_indices();
        let adam = AdamState::new(indices.iter().map(|&i| &model.store().get(i).value), opt.learning_rate as f32);
        Self {
            opt: opt.clone(),
            loss: *loss,
            adam,
            indices,
            rng: ChaCha8Rng::seed_from_u64(seed),
            step: 0,
            epoch: 0,
            momentum: model.config().bn_momentum as f32,
        }
    }

    pub fn steps_done(&self) -> usize {
        self.step
    }

    pub fn epochs_done(&self) -> usize {
        self.epoch
    }

    fn finished(&self) -> bool {
        self.opt.max_steps.is_some_and(|m| self.step >= m)
    }

    /// One forward/backward pass and Adam update on `batch`.
    pub fn step(&mut self, model: &mut Model, batch: &[&Sample]) -> Result<StepRecord, HarnessError> {
        let lr = self.opt.learning_rate_at(self.epoch);
        let (cam, rad, targets) = batch_inputs(batch)?;
        let (value, grads, stats) = {
            let mut f = model.forward_context(true);
            let out = model.forward(&mut f, cam, rad)?;
            let l: LossValue<f32> = detection_loss(f.value(out.cls), f.value(out.reg), &targets, &self.loss)
                .map_err(|e| self.non_finite(format!("loss evaluation failed: {e}")))?;
            let root = f.graph.custom_scalar(l.total, vec![(out.cls, l.grad_cls.clone()), (out.reg, l.grad_reg.clone())])?;
            let mut g = f.graph.backward(root)?;
            let mut per_param: Vec<Option<Tensor<f32>>> = vec![None; model.store().len()];
            for (i, v) in f.used_params() {
                per_param[i] = Some(g.take(v));
            }
            (l, per_param, f.take_bn_stats())
        };
        let grads: Vec<Tensor<f32>> = self
            .indices
            .iter()
            .map(|&i| grads[i].clone().unwrap_or_else(|| Tensor::zeros(model.store().get(i).value.shape())))
            .collect();
        if let Some(k) = grads.iter().position(|g| !g.is_finite()) {
            let name = model.store().get(self.indices[k]).name.clone();
            return Err(self.non_finite(format!("gradient of {name} is not finite")));
        }
        self.adam.lr = lr as f32;
        {
            let mut params: Vec<&mut Tensor<f32>> = model
                .store_mut()
                .iter_mut()
                .filter(|p| p.is_optimised())
                .map(|p| &mut p.value)
                .collect();
            adam_update(&mut params, &grads, &mut self.adam)?;
        }
        apply_bn_stats(model.store_mut(), &stats, self.momentum);
        self.step += 1;
        Ok(StepRecord {
            step: self.step,
            epoch: self.epoch,
            learning_rate: lr,
            loss: value.total as f64,
            focal: value.focal as f64,
            regression: value.regression as f64,
        })
    }

    fn non_finite(&self, detail: String) -> HarnessError {
        HarnessError::NonFiniteLoss {
            epoch: self.epoch,
            step: self.step,
            detail,
        }
    }

    /// Shuffled pass over `samples` in batches; stops early at `max_steps`.
    pub fn epoch(&mut self, model: &mut Model, samples: &[Sample], log: &mut Vec<StepRecord>) -> Result<EpochRecord, HarnessError> {
        if samples.is_empty() {
            return Err(HarnessError::Dataset("no training frames".into()));
        }
        let mut order: Vec<usize> = (0..samples.len()).collect();
        order.shuffle(&mut self.rng);
        let lr = self.opt.learning_rate_at(self.epoch);
        let (mut total, mut steps) = (0.0, 0);
        for chunk in order.chunks(self.opt.batch_size) {
            if self.finished() {
                break;
            }
            let batch: Vec<&Sample> = chunk.iter().map(|&i| &samples[i]).collect();
            let rec = self.step(model, &batch)?;
            total += rec.loss;
            steps += 1;
            log.push(rec);
        }
        let rec = EpochRecord {
            epoch: self.epoch,
            learning_rate: lr,
            steps,
            mean_loss: if steps > 0 { total / steps as f64 } else { f64::NAN },
        };
        self.epoch += 1;
        Ok(rec)
    }

    /// Runs the configured epochs, or fewer if `max_steps` is reached
    /// first, calling `on_epoch` after each with a last-epoch flag.
    pub fn train(
        &mut self,
        model: &mut Model,
        samples: &[Sample],
        mut on_epoch: impl FnMut(&EpochRecord, &Model, bool) -> Result<(), HarnessError>,
    ) -> Result<TrainReport, HarnessError> {
        let mut report = TrainReport::default();
        let epochs = self.opt.epochs;
        for e in 0..epochs {
            if self.finished() {
                break;
            }
            let rec = self.epoch(model, samples, &mut report.steps)?;
            let last = self.finished() || e + 1 == epochs;
            on_epoch(&rec, model, last)?;
            report.epochs.push(rec);
        }
        Ok(report)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct TrainReport {
    pub steps: Vec<StepRecord>,
    pub epochs: Vec<EpochRecord>,
}

impl TrainReport {
    pub fn final_loss(&self) -> Option<f64> {
        self.steps.last().map(|s| s.loss)
    }
}

/// Detection loss of `samples` with running batch-norm statistics.
pub fn inference_loss(model: &Model, samples: &[Sample], loss: &LossConfig) -> Result<f64, HarnessError> {
    let refs: Vec<&Sample> = samples.iter().collect();
    let (cam, rad, targets) = batch_inputs(&refs)?;
    let mut f = model.forward_context(false);
    let out = model.forward(&mut f, cam, rad)?;
    Ok(detection_loss(f.value(out.cls), f.value(out.reg), &targets, loss)?.total as f64)
}
