//! Finite-difference validation of reverse-mode gradients.
//!
//! All checks run in double precision with central differences:
//! `(f(x + h) - f(x - h)) / (2h)`. Errors are relative with an absolute
//! floor, so near-zero gradients do not blow the ratio up.

use super::{Tensor, Var};
use crate::error::{Error, Result};

/// Relative error between a reverse-mode and a finite-difference gradient
/// coordinate: `|ad - fd| / max(|ad|, |fd|, 1e-8)`.
pub fn rel_error(ad: f64, fd: f64) -> f64 {
    (ad - fd).abs() / ad.abs().max(fd.abs()).max(1e-8)
}

/// Compares the reverse-mode gradient of `f` at `input` against central
/// finite differences, coordinate by coordinate, and returns the worst
/// relative error.
///
/// `f` must map the traced input to a scalar (`1x1x1x1`) loss and be built
/// from this module's differentiable ops only. `step` is the half-width of
/// the central difference; `1e-5` is appropriate at double precision.
pub fn grad_check<F>(f: F, input: &Tensor<f64>, step: f64) -> Result<f64>
where
    F: Fn(&Var<f64>) -> Result<Var<f64>>,
{
    grad_check_with_injected_fault(f, input, step, 0.0)
}

/// [`grad_check`] with a deliberate corruption of the first reverse-mode
/// gradient coordinate. A nonzero `fault` must make the check fail; this is
/// the self-test hook proving the checker detects wrong gradients.
pub fn grad_check_with_injected_fault<F>(
    f: F,
    input: &Tensor<f64>,
    step: f64,
    fault: f64,
) -> Result<f64>
where
    F: Fn(&Var<f64>) -> Result<Var<f64>>,
{
    if !(step > 0.0) || !step.is_finite() {
        return Err(Error::invalid("grad_check", format!("invalid step {step}")));
    }
    let x = Var::input(input.clone());
    let loss = f(&x)?;
    loss.scalar_value()
        .map_err(|_| Error::invalid("grad_check", format!("loss must be scalar, got {}", loss.shape())))?;
    let grads = loss.backward()?;
    let mut ad = grads
        .get(&x)
        .cloned()
        .unwrap_or_else(|| Tensor::zeros(input.shape()));
    if fault != 0.0 {
        let v = ad.data()[0];
        ad = ad.with_value_at(0, 0, 0, 0, v + fault);
    }

    let data = input.data();
    let mut worst = 0.0f64;
    for i in 0..data.len() {
        let mut plus = input.clone();
        plus.data_mut()[i] += step;
        let lp = f(&Var::constant(plus))?.scalar_value()?;
        let mut minus = input.clone();
        minus.data_mut()[i] -= step;
        let lm = f(&Var::constant(minus))?.scalar_value()?;
        let fd = (lp - lm) / (2.0 * step);
        worst = worst.max(rel_error(ad.data()[i], fd));
    }
    Ok(worst)
}

