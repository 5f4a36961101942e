//! The Sign-In parameterization `θ = m ⊙ w` with balance `m² − w² = β`.
//!
//! Under gradient flow on `(m, w)` the balance of every coordinate is conserved
//! and the merged weight follows a Riemannian flow whose metric factor is
//! `m² + w² = sqrt(β² + 4θ²)`. That factor stays at least `β` at `θ = 0`, which
//! is what lets a coordinate cross zero. Discrete steps and weight decay erode
//! the balance, so training periodically restores it with [`rescale`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One layer held as paired factors plus a fixed binary mask.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignInLayer {
    shape: Vec<usize>,
    pub m: Vec<f64>,
    pub w: Vec<f64>,
    mask: Vec<bool>,
    beta: f64,
}

/// Closed-form balanced split of a single value: `m·w = x`, `m² − w² = β`.
///
/// `u = sqrt(α + sqrt(x² + α²))` with `α = β/2`, then `m = u`, `w = x/u`.
pub fn split_scalar(x: f64, beta: f64) -> (f64, f64) {
    let alpha = 0.5 * beta;
    let u = (alpha + x.hypot(alpha)).sqrt();
    if x == 0.0 {
        (u, 0.0)
    } else {
        (u, x / u)
    }
}

fn check_beta(beta: f64) -> Result<()> {
    if beta > 0.0 && beta.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid("beta", format!("must be positive and finite, got {beta}")))
    }
}

pub fn split_init(x: &[f64], beta: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    check_beta(beta)?;
    if let Some(i) = x.iter().position(|v| !v.is_finite()) {
        return Err(Error::invalid("x", format!("entry {i} is not finite")));
    }
    Ok(x.iter().map(|&v| split_scalar(v, beta)).unzip())
}

impl SignInLayer {
    /// Splits `weights` into balanced factors. `mask = None` keeps every coordinate.
    pub fn from_weights(shape: Vec<usize>, weights: &[f64], mask: Option<Vec<bool>>, beta: f64) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != weights.len() {
            return Err(Error::Shape(format!("shape {shape:?} needs {n} weights, got {}", weights.len())));
        }
        let mask = mask.unwrap_or_else(|| vec![true; n]);
        if mask.len() != n {
            return Err(Error::Shape("mask shape differs from weights".into()));
        }
        let (m, w) = split_init(weights, beta)?;
        Ok(Self { shape, m, w, mask, beta })
    }

    /// Builds a layer from explicit factors; no balance is imposed.
    pub fn from_factors(shape: Vec<usize>, m: Vec<f64>, w: Vec<f64>, mask: Vec<bool>, beta: f64) -> Result<Self> {
        check_beta(beta)?;
        let n: usize = shape.iter().product();
        if m.len() != n || w.len() != n || mask.len() != n {
            return Err(Error::Shape("factor, mask and shape sizes must agree".into()));
        }
        Ok(Self { shape, m, w, mask, beta })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m.is_empty()
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// `m² − w²` per coordinate.
    pub fn balance(&self) -> Vec<f64> {
        self.m.iter().zip(&self.w).map(|(m, w)| m * m - w * w).collect()
    }

    /// `m² + w²` per coordinate: the step-size factor the factors impose on `θ`.
    pub fn metric_factor(&self) -> Vec<f64> {
        self.m.iter().zip(&self.w).map(|(m, w)| m * m + w * w).collect()
    }

    /// Product `m ⊙ w` ignoring the mask.
    pub fn product(&self) -> Vec<f64> {
        self.m.iter().zip(&self.w).map(|(m, w)| m * w).collect()
    }

    /// Plain gradient step on both factors.
    pub fn step(&mut self, g_m: &[f64], g_w: &[f64], lr: f64) {
        for (m, g) in self.m.iter_mut().zip(g_m) {
            *m -= lr * g;
        }
        for (w, g) in self.w.iter_mut().zip(g_w) {
            *w -= lr * g;
        }
    }
}

/// `mask ⊙ m ⊙ w`.
pub fn merge(layer: &SignInLayer) -> Vec<f64> {
    layer
        .m
        .iter()
        .zip(&layer.w)
        .zip(&layer.mask)
        .map(|((m, w), &keep)| if keep { m * w } else { 0.0 })
        .collect()
}

/// Restores `m² − w² = β` on the mask support while keeping every product.
/// Off-support coordinates are left as they are.
pub fn rescale(layer: &SignInLayer) -> SignInLayer {
    let mut out = layer.clone();
    for i in 0..out.m.len() {
        if out.mask[i] {
            let (m, w) = split_scalar(layer.m[i] * layer.w[i], layer.beta);
            out.m[i] = m;
            out.w[i] = w;
        }
    }
    out
}

/// Chain rule through `mask ⊙ m ⊙ w`: `(mask⊙w⊙g, mask⊙m⊙g)`.
pub fn reparam_grads(layer: &SignInLayer, g_theta: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    if g_theta.len() != layer.len() {
        return Err(Error::Shape(format!(
            "gradient has {} entries, layer has {}",
            g_theta.len(),
            layer.len()
        )));
    }
    let mut g_m = vec![0.0; layer.len()];
    let mut g_w = vec![0.0; layer.len()];
    for i in 0..layer.len() {
        if layer.mask[i] {
            g_m[i] = layer.w[i] * g_theta[i];
            g_w[i] = layer.m[i] * g_theta[i];
        }
    }
    Ok((g_m, g_w))
}

/// Gradients of `λ Σ (m⊙w)²` on the mask support.
pub fn frobenius_decay_grads(layer: &SignInLayer, lambda: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::invalid("lambda", format!("must be nonnegative, got {lambda}")));
    }
    let mut g_m = vec![0.0; layer.len()];
    let mut g_w = vec![0.0; layer.len()];
    if lambda == 0.0 {
        return Ok((g_m, g_w));
    }
    for i in 0..layer.len() {
        if layer.mask[i] {
            let (m, w) = (layer.m[i], layer.w[i]);
            g_m[i] = 2.0 * lambda * m * w * w;
            g_w[i] = 2.0 * lambda * m * m * w;
        }
    }
    Ok((g_m, g_w))
}

/// When to restore the balance during training.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReparamSchedule {
    pub period: usize,
    pub stop_epoch: usize,
    pub beta: f64,
}

impl ReparamSchedule {
    pub fn new(period: usize, stop_epoch: usize, beta: f64) -> Result<Self> {
        let s = Self {
            period,
            stop_epoch,
            beta,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        check_beta(self.beta)?;
        if self.period == 0 {
            return Err(Error::invalid("period", "must be positive"));
        }
        if self.stop_epoch == 0 {
            return Err(Error::invalid("stop_epoch", "must be positive"));
        }
        if self.period > self.stop_epoch {
            return Err(Error::invalid(
                "period",
                format!("period {} exceeds stop epoch {}", self.period, self.stop_epoch),
            ));
        }
        Ok(())
    }

    /// Rescale at the top of 1-based `epoch` when `epoch mod p == 0` and `epoch < T2`.
    pub fn should_rescale(&self, epoch: usize) -> bool {
        epoch % self.period == 0 && epoch < self.stop_epoch
    }
}
