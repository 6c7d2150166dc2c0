//! Detection loss: focal classification term plus weighted smooth-L1
//! regression on occupied cells, with analytic gradients.

use serde::{Deserialize, Serialize};

use crate::geometry::PolarGridSpec;
use crate::tensor::{Result, Scalar, Tensor, TensorError};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossConfig {
    /// Focusing exponent γ.
    pub gamma: f64,
    /// Weight of positive cells in the focal term; negatives get `1 − α_f`.
    pub alpha_focal: f64,
    /// Weight α of the regression term.
    pub alpha: f64,
    /// Probabilities are clamped to `[ε_p, 1 − ε_p]`.
    pub eps_p: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            gamma: 2.0,
            alpha_focal: 0.25,
            alpha: 100.0,
            eps_p: 1e-6,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> std::result::Result<(), String> {
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(format!("focal gamma {} must be ≥ 0", self.gamma));
        }
        if !(self.alpha_focal > 0.0 && self.alpha_focal <= 1.0) {
            return Err(format!("focal alpha {} outside (0, 1]", self.alpha_focal));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(format!("regression weight {} must be > 0", self.alpha));
        }
        if !(self.eps_p > 0.0 && self.eps_p <= 1e-3) {
            return Err(format!("probability clamp {} outside (0, 1e-3]", self.eps_p));
        }
        Ok(())
    }
}

/// Training targets for one frame or a batch: `y_cls` is `[N×]1×G_r×G_a`
/// occupancy in {0, 1}, `y_reg` is `[N×]2×G_r×G_a` range/azimuth values
/// that only matter where `y_cls = 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct TargetMaps<T> {
    pub cls: Tensor<T>,
    pub reg: Tensor<T>,
}

impl<T: Scalar> TargetMaps<T> {
    /// Marks the cell containing each `(range m, azimuth deg)` object and
    /// stores its exact coordinates there. Objects outside the grid are
    /// skipped; a later object in the same cell overwrites an earlier one.
    pub fn from_objects(objects: &[(f64, f64)], grid: &PolarGridSpec) -> Self {
        let (gr, ga) = (grid.n_range, grid.n_azimuth);
        let mut cls = Tensor::zeros(&[1, gr, ga]);
        let mut reg = Tensor::zeros(&[2, gr, ga]);
        for &(r, theta) in objects {
            if let Some((i, j)) = grid.bin_of(r, theta) {
                cls.set(&[0, i, j], T::one());
                reg.set(&[0, i, j], T::from_f64(r));
                reg.set(&[1, i, j], T::from_f64(theta));
            }
        }
        Self { cls, reg }
    }

    pub fn positives(&self) -> usize {
        self.cls.data().iter().filter(|&&v| v == T::one()).count()
    }

    /// Stacks per-frame targets into a batch.
    pub fn stack(items: &[Self]) -> Result<Self> {
        let cls: Vec<_> = items.iter().map(|t| t.cls.clone()).collect();
        let reg: Vec<_> = items.iter().map(|t| t.reg.clone()).collect();
        Ok(Self {
            cls: Tensor::stack(&cls)?,
            reg: Tensor::stack(&reg)?,
        })
    }
}

fn check_same(op: &'static str, a: &[usize], b: &[usize]) -> Result<()> {
    if a != b {
        return Err(TensorError::ShapeMismatch {
            op,
            detail: format!("{a:?} vs {b:?}"),
        });
    }
    Ok(())
}

/// Mean focal loss over all cells and its gradient with respect to the
/// predicted probabilities (zero where the clamp is active).
pub fn focal_loss<T: Scalar>(y: &Tensor<T>, p_hat: &Tensor<T>, cfg: &LossConfig) -> Result<(T, Tensor<T>)> {
    check_same("focal_loss", y.shape(), p_hat.shape())?;
    let n = y.numel().max(1) as f64;
    let (gamma, af, eps) = (cfg.gamma, cfg.alpha_focal, cfg.eps_p);
    let mut total = 0.0f64;
    let mut grad = Vec::with_capacity(y.numel());
    for (&t, &q) in y.data().iter().zip(p_hat.data()) {
        let raw = q.as_f64();
        let p = raw.clamp(eps, 1.0 - eps);
        let clamped = raw != p;
        let positive = t.as_f64() > 0.5;
        // Write both cases in terms of p_t and map the derivative back.
        let (pt, alpha_t, dpt_dp) = if positive { (p, af, 1.0) } else { (1.0 - p, 1.0 - af, -1.0) };
        let one_minus = 1.0 - pt;
        let log_pt = pt.ln();
        total += -alpha_t * one_minus.powf(gamma) * log_pt;
        let d_pt = if gamma == 0.0 {
            -alpha_t / pt
        } else {
            -alpha_t * (one_minus.powf(gamma) / pt - gamma * one_minus.powf(gamma - 1.0) * log_pt)
        };
        grad.push(if clamped { T::zero() } else { T::from_f64(d_pt * dpt_dp / n) });
    }
    Ok((T::from_f64(total / n), Tensor::new(p_hat.shape(), grad)?))
}

fn smooth(e: f64) -> (f64, f64) {
    if e.abs() < 1.0 {
        (0.5 * e * e, e)
    } else {
        (e.abs() - 0.5, e.signum())
    }
}

/// Smooth-L1 averaged over the two regression channels of every positive
/// cell; zero (with zero gradient) when there are no positives. `mask` is
/// the occupancy map, one channel per item.
pub fn smooth_l1<T: Scalar>(y_reg: &Tensor<T>, reg_hat: &Tensor<T>, mask: &Tensor<T>) -> Result<(T, Tensor<T>)> {
    check_same("smooth_l1", y_reg.shape(), reg_hat.shape())?;
    let s = reg_hat.shape();
    if s.len() < 3 || mask.ndim() != s.len() || mask.shape()[s.len() - 3] != 1 || mask.numel() * 2 != reg_hat.numel() {
        return Err(TensorError::ShapeMismatch {
            op: "smooth_l1",
            detail: format!("mask {:?} does not fit regression maps {s:?}", mask.shape()),
        });
    }
    let plane = s[s.len() - 1] * s[s.len() - 2];
    let positives = mask.data().iter().filter(|&&m| m.as_f64() > 0.5).count();
    let mut grad = vec![T::zero(); reg_hat.numel()];
    if positives == 0 {
        return Ok((T::zero(), Tensor::new(s, grad)?));
    }
    let denom = (2 * positives) as f64;
    let mut total = 0.0;
    for (cell, &m) in mask.data().iter().enumerate() {
        if m.as_f64() <= 0.5 {
            continue;
        }
        let (item, at) = (cell / plane, cell % plane);
        for ch in 0..2 {
            let k = (item * 2 + ch) * plane + at;
            let (v, d) = smooth(reg_hat.data()[k].as_f64() - y_reg.data()[k].as_f64());
            total += v;
            grad[k] = T::from_f64(d / denom);
        }
    }
    Ok((T::from_f64(total / denom), Tensor::new(s, grad)?))
}

/// Loss value, its two terms and gradients for both head outputs.
#[derive(Clone, Debug, PartialEq)]
pub struct LossValue<T> {
    pub total: T,
    pub focal: T,
    pub regression: T,
    pub grad_cls: Tensor<T>,
    pub grad_reg: Tensor<T>,
}

/// `focal(y_cls, ŷ_cls) + α · smooth_l1(y_reg, ŷ_reg)`.
pub fn detection_loss<T: Scalar>(
    cls_hat: &Tensor<T>,
    reg_hat: &Tensor<T>,
    target: &TargetMaps<T>,
    cfg: &LossConfig,
) -> Result<LossValue<T>> {
    let (focal, grad_cls) = focal_loss(&target.cls, cls_hat, cfg)?;
    let (regression, g) = smooth_l1(&target.reg, reg_hat, &target.cls)?;
    let a = T::from_f64(cfg.alpha);
    let total = focal + a * regression;
    if !total.as_f64().is_finite() {
        return Err(TensorError::NonFinite { op: "detection_loss" });
    }
    Ok(LossValue {
        total,
        focal,
        regression,
        grad_cls,
        grad_reg: g.map(|v| v * a),
    })
}
