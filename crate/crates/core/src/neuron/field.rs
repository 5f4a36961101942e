use serde::{Deserialize, Serialize};

use super::data::{dot, relu, NeuronData};
use crate::error::{Error, Result};

/// Gradients of `L = (1/2n) Σ (a σ(wᵀz_i) − y_i)²` plus the loss itself.
#[derive(Clone, Debug, PartialEq)]
pub struct NeuronGrads {
    pub loss: f64,
    pub da: f64,
    pub dw: Vec<f64>,
}

pub fn empirical_grads(a: f64, w: &[f64], data: &NeuronData) -> Result<NeuronGrads> {
    if w.len() != data.d {
        return Err(Error::Shape(format!("student width {} vs data width {}", w.len(), data.d)));
    }
    let mut dw = vec![0.0; data.d];
    let (loss, da) = accumulate_grads(a, w, data, &mut dw);
    Ok(NeuronGrads { loss, da, dw })
}

/// Allocation-free core used by the integrators; `dw` is overwritten.
pub(crate) fn accumulate_grads(a: f64, w: &[f64], data: &NeuronData, dw: &mut [f64]) -> (f64, f64) {
    dw.iter_mut().for_each(|g| *g = 0.0);
    let mut loss = 0.0;
    let mut da = 0.0;
    for i in 0..data.n {
        let z = data.row(i);
        let pre = dot(w, z);
        let act = relu(pre);
        let r = a * act - data.y[i];
        loss += r * r;
        da += r * act;
        if pre > 0.0 {
            let s = r * a;
            for (g, zj) in dw.iter_mut().zip(z) {
                *g += s * zj;
            }
        }
    }
    let n = data.n as f64;
    dw.iter_mut().for_each(|g| *g /= n);
    (loss / (2.0 * n), da / n)
}

/// Curvature constant of the closed-form single-neuron field.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PopulationField {
    pub c: f64,
}

impl PopulationField {
    /// `E[max(0, z)²] = 1/2` for standard normal inputs.
    pub const STANDARD_NORMAL: Self = Self { c: 0.5 };

    pub fn new(c: f64) -> Result<Self> {
        if c > 0.0 && c.is_finite() {
            Ok(Self { c })
        } else {
            Err(Error::invalid("c", "curvature must be positive"))
        }
    }
}

/// Which preconditioner the flow applies to each coordinate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FlowMethod {
    /// Plain gradient flow.
    Standard,
    /// Gradient scaled by `sqrt(θ² + β)` per coordinate.
    SignIn,
    /// Gradient descent on balanced factors `θ = m·w`, `m² − w² = β`. In
    /// continuous time this is the metric `m² + w² = sqrt(β² + 4θ²)`.
    SignInFactored,
}

impl FlowMethod {
    pub fn is_sign_in(self) -> bool {
        !matches!(self, FlowMethod::Standard)
    }
}

/// Metric factor applied to the gradient of a coordinate with value `x`.
#[inline]
pub fn metric_factor(method: FlowMethod, x: f64, beta: f64) -> f64 {
    match method {
        FlowMethod::Standard => 1.0,
        FlowMethod::SignIn => (x * x + beta).sqrt(),
        FlowMethod::SignInFactored => (4.0 * x * x + beta * beta).sqrt(),
    }
}

/// Closed-form velocity `(da/dt, dw₁/dt)` for `d = 1`, valid on `w₁ > 0`.
pub fn population_field(
    a: f64,
    w1: f64,
    field: PopulationField,
    beta1: f64,
    beta2: f64,
    method: FlowMethod,
) -> Result<(f64, f64)> {
    if !(w1 > 0.0) {
        return Err(Error::Domain(format!(
            "closed-form field needs w1 > 0 (got {w1}); use empirical gradients"
        )));
    }
    Ok(closed_form(a, w1, field.c, beta1, beta2, method))
}

/// Same field without the domain check; the origin is a stationary point.
pub(crate) fn closed_form(a: f64, w1: f64, c: f64, beta1: f64, beta2: f64, method: FlowMethod) -> (f64, f64) {
    let da = -c * metric_factor(method, a, beta1) * (a * w1 * w1 - w1);
    let dw = -c * metric_factor(method, w1, beta2) * (a * a * w1 - a);
    (da, dw)
}
