//! Named trainable parameters and the module-level parameter protocol.
//!
//! A [`Parameter`] is a named slot holding the current value of one weight
//! tensor as a differentiable graph leaf. Updating a parameter replaces the
//! leaf (tensors are immutable), so graphs recorded before the update keep
//! their original values. The [`ParamSet`] trait is the uniform surface the
//! optimizer, checkpointing, parameter counting, and gradient checks use.

use crate::error::{Error, Result};
use crate::tensor::{rel_error, Element, Gradients, Shape, Tensor, Var};

/// A named weight tensor enrolled in the differentiation graph.
#[derive(Debug)]
pub struct Parameter<T: Element> {
    name: String,
    var: Var<T>,
}

impl<T: Element> Parameter<T> {
    pub fn new(name: impl Into<String>, value: Tensor<T>) -> Self {
        Parameter {
            name: name.into(),
            var: Var::input(value),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Current graph leaf. Forward passes clone this handle; its id keys the
    /// gradient map of any backward pass recorded against it.
    pub fn var(&self) -> &Var<T> {
        &self.var
    }

    pub fn value(&self) -> &Tensor<T> {
        self.var.value()
    }

    pub fn shape(&self) -> Shape {
        self.var.shape()
    }

    pub fn elem_count(&self) -> usize {
        self.var.shape().count()
    }

    /// Replaces the parameter value with a fresh leaf of identical shape.
    pub fn set_value(&mut self, value: Tensor<T>) -> Result<()> {
        if value.shape() != self.var.shape() {
            return Err(Error::shape("Parameter::set_value", self.var.shape(), value.shape()));
        }
        self.var = Var::input(value);
        Ok(())
    }
}

/// Anything that owns an ordered collection of named parameters.
///
/// The order must be deterministic — it defines checkpoint blob layout and
/// optimizer iteration order.
pub trait ParamSet<T: Element> {
    fn params(&self) -> Vec<&Parameter<T>>;
    fn params_mut(&mut self) -> Vec<&mut Parameter<T>>;

    /// Total number of scalar weights.
    fn param_elems(&self) -> usize {
        self.params().iter().map(|p| p.elem_count()).sum()
    }

    fn param_names(&self) -> Vec<String> {
        self.params().iter().map(|p| p.name().to_string()).collect()
    }

    fn param(&self, name: &str) -> Option<&Parameter<T>> {
        self.params().into_iter().find(|p| p.name() == name)
    }

    fn set_param(&mut self, name: &str, value: Tensor<T>) -> Result<()> {
        match self.params_mut().into_iter().find(|p| p.name() == name) {
            Some(p) => p.set_value(value),
            None => Err(Error::invalid(
                "set_param",
                format!("no parameter named `{name}`"),
            )),
        }
    }

    /// Sets every parameter to zero. A network zeroed this way collapses to
    /// its skip connections, which several oracles rely on.
    fn zero_params(&mut self) {
        for p in self.params_mut() {
            let shape = p.shape();
            p.set_value(Tensor::zeros(shape)).expect("shape unchanged");
        }
    }
}

/// He-style initialization: zero-mean Gaussian with `std = sqrt(2 / fan_in)`.
/// Samples are drawn in row-major order from the supplied generator, so a
/// fixed seed reproduces weights bit-for-bit.
pub fn he_normal<T: Element>(shape: Shape, fan_in: usize, rng: &mut impl rand::Rng) -> Tensor<T> {
    let std = (2.0 / fan_in as f64).sqrt();
    Tensor::rand_normal(shape, std, rng)
}

/// Per-parameter result of [`grad_check_parameters`].
pub struct ParamCheckResult {
    pub name: String,
    pub worst_rel_error: f64,
}

/// Validates the reverse-mode gradient of every parameter of a module
/// against central finite differences at double precision.
///
/// `loss` must rebuild the forward pass from the module's current parameter
/// values each call and return a scalar. Returns the per-parameter worst
/// relative errors; the overall worst is their maximum.
pub fn grad_check_parameters<M: ParamSet<f64>>(
    module: &mut M,
    loss: impl Fn(&M) -> Result<Var<f64>>,
    step: f64,
) -> Result<Vec<ParamCheckResult>> {
    let reference = loss(module)?;
    let grads: Gradients<f64> = reference.backward()?;
    let names = module.param_names();
    let mut ad_grads = Vec::with_capacity(names.len());
    for p in module.params() {
        let g = grads
            .get(p.var())
            .cloned()
            .unwrap_or_else(|| Tensor::zeros(p.shape()));
        ad_grads.push(g);
    }

    let mut results = Vec::with_capacity(names.len());
    for (pi, name) in names.iter().enumerate() {
        let base = module.param(name).expect("name enumerated above").value().clone();
        let mut worst = 0.0f64;
        for i in 0..base.shape().count() {
            let mut plus = base.clone();
            plus.data_mut()[i] += step;
            module.set_param(name, plus)?;
            let lp = loss(module)?.scalar_value()?;

            let mut minus = base.clone();
            minus.data_mut()[i] -= step;
            module.set_param(name, minus)?;
            let lm = loss(module)?.scalar_value()?;

            let fd = (lp - lm) / (2.0 * step);
            worst = worst.max(rel_error(ad_grads[pi].data()[i], fd));
        }
        module.set_param(name, base)?;
        results.push(ParamCheckResult {
            name: name.clone(),
            worst_rel_error: worst,
        });
    }
    Ok(results)
}
