//! Adam optimizer with hyperbolic step-count decay and plateau tracking.

use super::{Float, Gradients, LayerGrads, Network};
use crate::error::{Error, Result};

/// Exponential-moving-average constants of the Adam update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamHyper {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamHyper {
    fn default() -> Self {
        AdamHyper { beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// Optimizer state: first/second gradient moments shaped like the
/// parameters, the step counter, the current (plateau-adjusted) base
/// learning rate with its hyperbolic decay constant, and the plateau
/// bookkeeping used by the training loop.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainState<F: Float> {
    pub m: Vec<LayerGrads<F>>,
    pub v: Vec<LayerGrads<F>>,
    /// Number of optimizer steps taken so far.
    pub step: u64,
    /// Base learning rate after any plateau halvings.
    pub lr_plateau: f64,
    /// Hyperbolic decay constant: the effective rate of step `t` (counting
    /// from 0) is `lr_plateau / (1 + decay * t)`.
    pub decay: f64,
    /// Best validation loss seen so far.
    pub best_val: f64,
    /// Epochs since the validation loss last improved.
    pub epochs_since_improve: u32,
}

impl<F: Float> TrainState<F> {
    pub fn new(net: &Network<F>, lr: f64, decay: f64) -> TrainState<F> {
        TrainState {
            m: Gradients::zeroed(net).layers,
            v: Gradients::zeroed(net).layers,
            step: 0,
            lr_plateau: lr,
            decay,
            best_val: f64::INFINITY,
            epochs_since_improve: 0,
        }
    }

    /// Effective learning rate of the next step.
    pub fn effective_lr(&self) -> f64 {
        self.lr_plateau / (1.0 + self.decay * self.step as f64)
    }
}

/// One Adam update of every network parameter from the accumulated
/// gradients. Bias-corrected moments; the update is
/// `theta -= lr_t * m_hat / (sqrt(v_hat) + eps)`.
pub fn adam_step<F: Float>(
    net: &mut Network<F>,
    grads: &Gradients<F>,
    state: &mut TrainState<F>,
    hyper: &AdamHyper,
) -> Result<()> {
    if grads.layers.len() != state.m.len() {
        return Err(Error::InvalidArgument("gradient/state layer count mismatch".into()));
    }
    let lr_t = state.effective_lr();
    state.step += 1;
    let t = state.step as i32;
    let corr1 = 1.0 - hyper.beta1.powi(t);
    let corr2 = 1.0 - hyper.beta2.powi(t);
    let b1 = F::from_f64(hyper.beta1);
    let b1c = F::from_f64(1.0 - hyper.beta1);
    let b2 = F::from_f64(hyper.beta2);
    let b2c = F::from_f64(1.0 - hyper.beta2);
    let inv1 = F::from_f64(1.0 / corr1);
    let inv2 = F::from_f64(1.0 / corr2);
    let lr = F::from_f64(lr_t);
    let eps = F::from_f64(hyper.eps);

    let mut params = net.params_mut();
    let mut pos = 0usize;
    for (li, g) in grads.layers.iter().enumerate() {
        if g.w.is_empty() && g.b.is_empty() {
            continue;
        }
        let (w, b) = &mut params[pos];
        pos += 1;
        let (sm, sv) = (&mut state.m[li], &mut state.v[li]);
        if sm.w.len() != g.w.len() || w.len() != g.w.len() || b.len() != g.b.len() {
            return Err(Error::InvalidArgument("gradient shape mismatch in optimizer".into()));
        }
        update(w, &g.w, &mut sm.w, &mut sv.w, b1, b1c, b2, b2c, inv1, inv2, lr, eps);
        update(b, &g.b, &mut sm.b, &mut sv.b, b1, b1c, b2, b2c, inv1, inv2, lr, eps);
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn update<F: Float>(
    theta: &mut [F],
    g: &[F],
    m: &mut [F],
    v: &mut [F],
    b1: F,
    b1c: F,
    b2: F,
    b2c: F,
    inv1: F,
    inv2: F,
    lr: F,
    eps: F,
) {
    for i in 0..theta.len() {
        let gi = g[i];
        m[i] = b1 * m[i] + b1c * gi;
        v[i] = b2 * v[i] + b2c * gi * gi;
        let m_hat = m[i] * inv1;
        let v_hat = v[i] * inv2;
        theta[i] = theta[i] - lr * m_hat / (v_hat.sqrt() + eps);
    }
}
