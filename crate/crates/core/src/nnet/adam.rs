//! Adam with bias correction.

use crate::{Error, Result};

use super::{ModelConfig, ModelParams, Real};

/// Optimizer state: step count plus first/second moment arrays shaped like
/// the parameters.
#[derive(Clone, Debug)]
pub struct AdamState<T> {
    pub step: u64,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    m: ModelParams<T>,
    v: ModelParams<T>,
}

impl<T: Real> AdamState<T> {
    /// Fresh state with the community-standard constants β₁=0.9, β₂=0.999,
    /// ε=1e-8 and zeroed moments.
    pub fn new(config: ModelConfig, learning_rate: f64) -> Self {
        AdamState {
            step: 0,
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            m: ModelParams::zeros(config),
            v: ModelParams::zeros(config),
        }
    }
}

/// One Adam update over a single parameter slice:
///
/// m ← β₁m + (1−β₁)g;  v ← β₂v + (1−β₂)g²;
/// m̂ = m/(1−β₁ᵗ);  v̂ = v/(1−β₂ᵗ);  θ ← θ − α·m̂/(√v̂+ε)
///
/// `step` is the already-incremented step count t (1 on the first update).
/// Public so the scalar-oracle tests can drive a single coordinate.
#[allow(clippy::too_many_arguments)]
pub fn update_slice<T: Real>(
    name: &str,
    theta: &mut [T],
    grad: &[T],
    m: &mut [T],
    v: &mut [T],
    step: u64,
    learning_rate: f64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
) -> Result<()> {
    if grad.len() != theta.len() || m.len() != theta.len() || v.len() != theta.len() {
        return Err(Error::Dimension(format!(
            "adam arrays for {name} disagree in length"
        )));
    }
    if let Some(idx) = grad.iter().position(|g| !g.is_finite()) {
        return Err(Error::NonFinite(format!("gradient of {name} at index {idx}")));
    }
    let b1 = T::from_f64(beta1);
    let b2 = T::from_f64(beta2);
    let one_m_b1 = T::from_f64(1.0 - beta1);
    let one_m_b2 = T::from_f64(1.0 - beta2);
    let corr1 = T::from_f64(1.0 - beta1.powi(step as i32));
    let corr2 = T::from_f64(1.0 - beta2.powi(step as i32));
    let lr = T::from_f64(learning_rate);
    let eps = T::from_f64(epsilon);
    for k in 0..theta.len() {
        let g = grad[k];
        m[k] = b1 * m[k] + one_m_b1 * g;
        v[k] = b2 * v[k] + one_m_b2 * g * g;
        let m_hat = m[k] / corr1;
        let v_hat = v[k] / corr2;
        theta[k] = theta[k] - lr * m_hat / (v_hat.sqrt() + eps);
    }
    Ok(())
}

/// One optimizer step over all parameter arrays. Validation happens before
/// any mutation, so a non-finite gradient leaves parameters and state
/// untouched. The PAD embedding row is re-zeroed after the update.
pub fn adam_step<T: Real>(
    params: &mut ModelParams<T>,
    grads: &ModelParams<T>,
    state: &mut AdamState<T>,
) -> Result<()> {
    if grads.config != params.config {
        return Err(Error::Dimension(
            "gradient shapes do not match parameter shapes".into(),
        ));
    }
    for (name, array) in grads.arrays() {
        if let Some(idx) = array.iter().position(|g| !g.is_finite()) {
            return Err(Error::NonFinite(format!("gradient of {name} at index {idx}")));
        }
    }
    state.step += 1;
    let (step, lr) = (state.step, state.learning_rate);
    let (b1, b2, eps) = (state.beta1, state.beta2, state.epsilon);
    for (((p, g), m), v) in params
        .arrays_mut()
        .into_iter()
        .zip(grads.arrays())
        .zip(state.m.arrays_mut())
        .zip(state.v.arrays_mut())
    {
        update_slice(g.0, p.1, g.1, m.1, v.1, step, lr, b1, b2, eps)?;
    }
    for k in 0..params.config.embed_dim {
        params.embedding[k] = T::zero();
    }
    Ok(())
}
