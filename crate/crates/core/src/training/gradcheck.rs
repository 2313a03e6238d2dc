use super::backprop::backprop_sequence;
use crate::blstm::BlstmModel;
use crate::error::{ensure_dims, Result};
use crate::features::FeatureSequence;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-8)
}

/// `L(a) - L(b)` for the MSE, summed per entry as `(a-b)(a+b-2y)` so that
/// entries the perturbation never reaches cancel exactly instead of leaving
/// the rounding noise of two full loss sums.
fn loss_difference(
    a: &FeatureSequence,
    b: &FeatureSequence,
    target: &FeatureSequence,
) -> Result<f64> {
    ensure_dims("loss operand rows", target.len(), a.len())?;
    ensure_dims("loss operand dim", target.dim(), a.dim())?;
    let n = target.frames().len() as f64;
    let sum: f64 = a
        .frames()
        .iter()
        .zip(b.frames())
        .zip(target.frames())
        .map(|((p, m), y)| (p - m) * ((p - y) + (m - y)))
        .sum();
    Ok(sum / n)
}

/// Central-difference gradient of the forward-pass loss, one parameter at a
/// time, in serialization order.
pub fn numeric_gradient(
    model: &BlstmModel,
    input: &FeatureSequence,
    target: &FeatureSequence,
    epsilon: f64,
) -> Result<Vec<f64>> {
    let base = model.params().to_flat();
    let mut probe = model.clone();
    let mut theta = base.clone();
    let mut out = Vec::with_capacity(base.len());
    for k in 0..base.len() {
        theta[k] = base[k] + epsilon;
        probe.params_mut().set_flat(&theta)?;
        let plus = probe.forward(input)?;
        theta[k] = base[k] - epsilon;
        probe.params_mut().set_flat(&theta)?;
        let minus = probe.forward(input)?;
        theta[k] = base[k];
        out.push(loss_difference(&plus, &minus, target)? / (2.0 * epsilon));
    }
    Ok(out)
}

/// Largest relative error between `analytic` and central differences.
pub fn grad_check_against(
    model: &BlstmModel,
    input: &FeatureSequence,
    target: &FeatureSequence,
    epsilon: f64,
    analytic: &[f64],
) -> Result<f64> {
    ensure_dims(
        "analytic gradient length",
        model.param_count(),
        analytic.len(),
    )?;
    let numeric = numeric_gradient(model, input, target, epsilon)?;
    Ok(analytic
        .iter()
        .zip(&numeric)
        .map(|(&a, &n)| relative_error(a, n))
        .fold(0.0, f64::max))
}

/// Checks [`backprop_sequence`] against central differences and returns the
/// maximum relative error over all parameters.
pub fn grad_check(
    model: &BlstmModel,
    input: &FeatureSequence,
    target: &FeatureSequence,
    epsilon: f64,
) -> Result<f64> {
    let (_, g) = backprop_sequence(model, input, target)?;
    grad_check_against(model, input, target, epsilon, &g.to_flat())
}
