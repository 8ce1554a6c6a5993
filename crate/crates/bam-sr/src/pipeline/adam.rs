//! Adam optimizer with bias-corrected moments.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::params::Parameter;
use crate::tensor::{Element, Gradients, Tensor};

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

/// First and second moment estimates for every parameter, keyed by
/// parameter name, plus the global step counter. Moments appear lazily on
/// the first step, zero-initialized.
#[derive(Debug)]
pub struct AdamState<T: Element> {
    step: u64,
    moments: HashMap<String, (Tensor<T>, Tensor<T>)>,
}

impl<T: Element> Default for AdamState<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Element> AdamState<T> {
    pub fn new() -> Self {
        AdamState { step: 0, moments: HashMap::new() }
    }

    /// Rebuilds a state saved in a checkpoint.
    pub fn from_parts(step: u64, moments: HashMap<String, (Tensor<T>, Tensor<T>)>) -> Self {
        AdamState { step, moments }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// First/second moment pair for one parameter, if any step touched it.
    pub fn moments_of(&self, name: &str) -> Option<&(Tensor<T>, Tensor<T>)> {
        self.moments.get(name)
    }

    /// One Adam update over every parameter. Each parameter must have a
    /// gradient (missing gradients abort — they indicate a disconnected
    /// graph), and any non-finite gradient aborts naming the parameter. A
    /// zero gradient on zero state leaves its parameter bit-unchanged.
    pub fn step(
        &mut self,
        params: Vec<&mut Parameter<T>>,
        grads: &Gradients<T>,
        lr: f64,
    ) -> Result<()> {
        self.step += 1;
        let t = self.step as i32;
        let bias1 = 1.0 - BETA1.powi(t);
        let bias2 = 1.0 - BETA2.powi(t);
        for param in params {
            let grad = grads
                .get(param.var())
                .ok_or_else(|| Error::MissingGradient { param: param.name().to_owned() })?;
            if !grad.is_finite() {
                return Err(Error::NonFiniteGradient { param: param.name().to_owned() });
            }
            let shape = param.shape();
            let (m, v) = self
                .moments
                .entry(param.name().to_owned())
                .or_insert_with(|| (Tensor::zeros(shape), Tensor::zeros(shape)));
            let mut value = param.value().clone();
            {
                let values = value.data_mut();
                let ms = m.data_mut();
                let vs = v.data_mut();
                for i in 0..values.len() {
                    let g = grad.data()[i].to_f64();
                    let mi = BETA1 * ms[i].to_f64() + (1.0 - BETA1) * g;
                    let vi = BETA2 * vs[i].to_f64() + (1.0 - BETA2) * g * g;
                    ms[i] = T::from_f64(mi);
                    vs[i] = T::from_f64(vi);
                    let m_hat = mi / bias1;
                    let v_hat = vi / bias2;
                    let update = lr * m_hat / (v_hat.sqrt() + EPSILON);
                    if update != 0.0 {
                        values[i] = T::from_f64(values[i].to_f64() - update);
                    }
                }
            }
            param.set_value(value)?;
        }
        Ok(())
    }
}
