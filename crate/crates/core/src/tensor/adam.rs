use super::{Result, Scalar, Tensor, TensorError};

/// Adam moments and hyper-parameters for a fixed list of parameters.
#[derive(Clone, Debug)]
pub struct AdamState<T> {
    pub step: u64,
    pub lr: T,
    pub beta1: T,
    pub beta2: T,
    pub eps: T,
    first: Vec<Tensor<T>>,
    second: Vec<Tensor<T>>,
}

impl<T: Scalar> AdamState<T> {
    /// Zeroed moments shaped like `params`, with the usual defaults
    /// `beta1 = 0.9`, `beta2 = 0.999`, `eps = 1e-8`.
    pub fn new<'a>(params: impl IntoIterator<Item = &'a Tensor<T>>, lr: T) -> Self {
        let first: Vec<Tensor<T>> = params.into_iter().map(|p| Tensor::zeros(p.shape())).collect();
        let second = first.clone();
        Self {
            step: 0,
            lr,
            beta1: T::from_f64(0.9),
            beta2: T::from_f64(0.999),
            eps: T::from_f64(1e-8),
            first,
            second,
        }
    }

    pub fn first_moments(&self) -> &[Tensor<T>] {
        &self.first
    }

    pub fn second_moments(&self) -> &[Tensor<T>] {
        &self.second
    }
}

/// One bias-corrected Adam step over every parameter.
pub fn adam_update<T: Scalar>(params: &mut [&mut Tensor<T>], grads: &[Tensor<T>], state: &mut AdamState<T>) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.first.len() {
        return Err(TensorError::ShapeMismatch {
            op: "adam_update",
            detail: format!(
                "{} params, {} grads, {} moment slots",
                params.len(),
                grads.len(),
                state.first.len()
            ),
        });
    }
    for (i, (p, g)) in params.iter().zip(grads).enumerate() {
        if p.shape() != g.shape() || p.shape() != state.first[i].shape() {
            return Err(TensorError::ShapeMismatch {
                op: "adam_update",
                detail: format!("param {i}: {:?} vs grad {:?}", p.shape(), g.shape()),
            });
        }
    }
    state.step += 1;
    let t = state.step as i32;
    let one = T::one();
    let (b1, b2) = (state.beta1, state.beta2);
    let c1 = one - b1.powi(t);
    let c2 = one - b2.powi(t);
    for (i, (p, g)) in params.iter_mut().zip(grads).enumerate() {
        let m = state.first[i].data_mut();
        let v = state.second[i].data_mut();
        for (k, (w, &gk)) in p.data_mut().iter_mut().zip(g.data()).enumerate() {
            m[k] = b1 * m[k] + (one - b1) * gk;
            v[k] = b2 * v[k] + (one - b2) * gk * gk;
            let m_hat = m[k] / c1;
            let v_hat = v[k] / c2;
            *w = *w - state.lr * m_hat / (v_hat.sqrt() + state.eps);
        }
    }
    Ok(())
}
