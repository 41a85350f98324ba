//! Named trainable parameters and the Adam optimizer.

use crate::error::{Error, Result};
use crate::num::Real;
use crate::numerics::matrix::Matrix;

/// A named weight matrix with its gradient and Adam moment buffers.
#[derive(Clone, Debug)]
pub struct Parameter<T> {
    name: String,
    pub value: Matrix<T>,
    pub grad: Matrix<T>,
    adam_m: Matrix<T>,
    adam_v: Matrix<T>,
    step_count: u64,
}

impl<T: Real> Parameter<T> {
    pub fn new(name: impl Into<String>, value: Matrix<T>) -> Self {
        let (r, c) = value.shape();
        Parameter {
            name: name.into(),
            value,
            grad: Matrix::zeros(r, c),
            adam_m: Matrix::zeros(r, c),
            adam_v: Matrix::zeros(r, c),
            step_count: 0,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(T::zero());
    }

    /// Replace the value, preserving optimizer state shape checks.
    pub fn assign(&mut self, value: &Matrix<T>) -> Result<()> {
        if self.value.shape() != value.shape() {
            return Err(Error::ShapeMismatch(format!(
                "{}: expected {}x{}, got {}x{}",
                self.name,
                self.value.shape().0,
                self.value.shape().1,
                value.shape().0,
                value.shape().1
            )));
        }
        self.value = value.clone();
        Ok(())
    }
}

/// Anything that exposes its parameters in a stable order.
///
/// The order defines the checkpoint layout, the init stream consumption and
/// the coordinate order of the finite-difference oracle.
pub trait ParamStore<T> {
    fn params(&self) -> Vec<&Parameter<T>>;
    fn params_mut(&mut self) -> Vec<&mut Parameter<T>>;

    fn zero_grads(&mut self)
    where
        T: Real,
    {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }

    fn scale_grads(&mut self, s: T)
    where
        T: Real,
    {
        for p in self.params_mut() {
            p.grad.scale(s);
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct AdamConfig<T> {
    pub beta1: T,
    pub beta2: T,
    pub eps: T,
}

impl<T: Real> Default for AdamConfig<T> {
    fn default() -> Self {
        AdamConfig { beta1: T::of(0.9), beta2: T::of(0.999), eps: T::of(1e-8) }
    }
}

/// One bias-corrected Adam update, in place. Gradients are left untouched;
/// the caller zeroes them between batches.
pub fn adam_step<T: Real>(
    params: &mut [&mut Parameter<T>],
    lr: T,
    cfg: &AdamConfig<T>,
) -> Result<()> {
    for p in params.iter_mut() {
        if !p.grad.is_finite() {
            return Err(Error::NonFiniteGradient(p.name.clone()));
        }
        p.step_count += 1;
        let t = p.step_count as i32;
        let bc1 = T::one() - cfg.beta1.powi(t);
        let bc2 = T::one() - cfg.beta2.powi(t);
        let n = p.value.len();
        for idx in 0..n {
            let g = p.grad.data()[idx];
            let m = cfg.beta1 * p.adam_m.data()[idx] + (T::one() - cfg.beta1) * g;
            let v = cfg.beta2 * p.adam_v.data()[idx] + (T::one() - cfg.beta2) * g * g;
            p.adam_m.data_mut()[idx] = m;
            p.adam_v.data_mut()[idx] = v;
            let m_hat = m / bc1;
            let v_hat = v / bc2;
            p.value.data_mut()[idx] -= lr * m_hat / (v_hat.sqrt() + cfg.eps);
        }
    }
    Ok(())
}
