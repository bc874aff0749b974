//! Clipped-surrogate PPO loss and its exact gradient.
//!
//! ```text
//! L = -mean(min(r A, clip(r, 1-eps, 1+eps) A))
//!     + c_v mean((V - R)^2)
//!     - c_e mean(H_sensor + H_velocity),      r = exp(logp - logp_old)
//! ```

use thiserror::Error;

use super::dist::{log_softmax, softmax};
use super::net::{MlpParams, ShapeError};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossCoefficients<T> {
    pub clip_eps: T,
    pub value_coef: T,
    pub entropy_coef: T,
}

/// Transitions fed to one gradient step.
#[derive(Debug, Clone, Default)]
pub struct Minibatch<T> {
    pub features: Vec<Vec<T>>,
    pub sensor_actions: Vec<usize>,
    pub velocity_actions: Vec<usize>,
    pub old_log_probs: Vec<T>,
    pub advantages: Vec<T>,
    pub returns: Vec<T>,
}

impl<T> Minibatch<T> {
    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossParts<T> {
    pub total: T,
    /// `-mean(min(...))`
    pub policy: T,
    /// `mean((V - R)^2)`, before the coefficient.
    pub value: T,
    /// `mean(H_sensor + H_velocity)`, before the coefficient.
    pub entropy: T,
    /// Fraction of samples where the clipped branch was selected.
    pub clip_fraction: T,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LossError {
    #[error(transparent)]
    Shape(#[from] ShapeError),
    #[error("empty minibatch")]
    Empty,
    #[error("non-finite loss or gradient")]
    NonFinite,
}

/// Per-sample entropy and its gradient wrt the logits:
/// `dH/dz_k = -p_k (log p_k + H)`.
fn entropy_and_grad<T: Scalar>(logits: &[T]) -> (T, Vec<T>) {
    let lp = log_softmax(logits);
    let h = lp.iter().map(|&l| -l.exp() * l).sum::<T>();
    let g = lp.iter().map(|&l| -l.exp() * (l + h)).collect();
    (h, g)
}

/// Computes the loss and, when `grad` is given, accumulates `dL/dθ` into it.
fn evaluate<T: Scalar>(
    params: &MlpParams<T>,
    mb: &Minibatch<T>,
    coef: &LossCoefficients<T>,
    mut grad: Option<&mut [T]>,
) -> Result<LossParts<T>, LossError> {
    if mb.is_empty() {
        return Err(LossError::Empty);
    }
    let b = T::of_usize(mb.len());
    let lo = T::one() - coef.clip_eps;
    let hi = T::one() + coef.clip_eps;
    let mut policy = T::zero();
    let mut value = T::zero();
    let mut entropy = T::zero();
    let mut clipped = T::zero();

    for i in 0..mb.len() {
        let fwd = params.forward(&mb.features[i])?;
        let (a_s, a_v) = (mb.sensor_actions[i], mb.velocity_actions[i]);
        let lps = log_softmax(&fwd.sensor_logits);
        let lpv = log_softmax(&fwd.velocity_logits);
        let logp = lps[a_s] + lpv[a_v];
        let ratio = (logp - mb.old_log_probs[i]).exp();
        let adv = mb.advantages[i];
        let surr1 = ratio * adv;
        let surr2 = ratio.max(lo).min(hi) * adv;
        let unclipped = surr1 <= surr2;
        policy -= surr1.min(surr2);
        if !unclipped {
            clipped += T::one();
        }

        let err = fwd.value - mb.returns[i];
        value += err * err;

        let (hs, dhs) = entropy_and_grad(&fwd.sensor_logits);
        let (hv, dhv) = entropy_and_grad(&fwd.velocity_logits);
        entropy += hs + hv;

        if let Some(g) = grad.as_deref_mut() {
            // d(-min)/d logp; zero when the constant clipped branch is taken
            let d_logp = if unclipped { -adv * ratio / b } else { T::zero() };
            let head_grad = |lp: &[T], dh: &[T], action: usize| -> Vec<T> {
                let p = softmax_from_log(lp);
                (0..p.len())
                    .map(|k| {
                        let onehot = if k == action { T::one() } else { T::zero() };
                        d_logp * (onehot - p[k]) - coef.entropy_coef * dh[k] / b
                    })
                    .collect()
            };
            let d_sensor = head_grad(&lps, &dhs, a_s);
            let d_velocity = head_grad(&lpv, &dhv, a_v);
            let d_value = T::of(2.0) * coef.value_coef * err / b;
            params.backward(&fwd, &d_sensor, &d_velocity, d_value, g);
        }
    }

    let policy = policy / b;
    let value = value / b;
    let entropy = entropy / b;
    let total = policy + coef.value_coef * value - coef.entropy_coef * entropy;
    if !total.is_finite() {
        return Err(LossError::NonFinite);
    }
    Ok(LossParts {
        total,
        policy,
        value,
        entropy,
        clip_fraction: clipped / b,
    })
}

fn softmax_from_log<T: Scalar>(lp: &[T]) -> Vec<T> {
    lp.iter().map(|&l| l.exp()).collect()
}

pub fn ppo_loss<T: Scalar>(
    params: &MlpParams<T>,
    mb: &Minibatch<T>,
    coef: &LossCoefficients<T>,
) -> Result<LossParts<T>, LossError> {
    evaluate(params, mb, coef, None)
}

/// Loss and the gradient wrt every parameter, in the flat layout.
pub fn loss_and_grad<T: Scalar>(
    params: &MlpParams<T>,
    mb: &Minibatch<T>,
    coef: &LossCoefficients<T>,
) -> Result<(LossParts<T>, Vec<T>), LossError> {
    let mut grad = vec![T::zero(); params.data.len()];
    let parts = evaluate(params, mb, coef, Some(&mut grad))?;
    if grad.iter().any(|g| !g.is_finite()) {
        return Err(LossError::NonFinite);
    }
    Ok((parts, grad))
}

/// Convenience for the probability vectors of both heads.
pub fn head_probs<T: Scalar>(params: &MlpParams<T>, features: &[T]) -> Result<(Vec<T>, Vec<T>), ShapeError> {
    let f = params.forward(features)?;
    Ok((softmax(&f.sensor_logits), softmax(&f.velocity_logits)))
}
