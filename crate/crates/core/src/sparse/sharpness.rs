use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::autodiff::{hvp_fd, DenseTensor, NetObjective, Objective, SmallNet, Targets};
use crate::error::{Error, Result};
use crate::harness::rng_for;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SharpnessOptions {
    /// Stop once successive Rayleigh quotients differ by less than `tol` (relative).
    pub tol: f64,
    pub max_iters: usize,
    /// Seed of the random start vector.
    pub seed: u64,
}

impl Default for SharpnessOptions {
    fn default() -> Self {
        Self {
            tol: 1e-7,
            max_iters: 300,
            seed: 0,
        }
    }
}

/// Dominant Hessian eigenvalue from power iteration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SharpnessEstimate {
    /// Rayleigh quotient at the last iterate (signed).
    pub lambda_max: f64,
    pub iterations: usize,
    /// Relative change of the last two Rayleigh quotients.
    pub residual: f64,
    pub converged: bool,
}

impl SharpnessEstimate {
    /// `|λ|` of the dominant eigenvalue, the quantity compared across runs.
    pub fn magnitude(&self) -> f64 {
        self.lambda_max.abs()
    }
}

/// Finite-difference step used for sharpness: `1e−4·(1 + ‖θ‖∞)`.
pub fn sharpness_eps(theta: &[f64]) -> f64 {
    1e-4 * (1.0 + theta.iter().fold(0.0f64, |m, x| m.max(x.abs())))
}

fn normalize(v: &mut [f64]) -> f64 {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    n
}

/// Power iteration on `v ↦ H v` restricted to `support` (all coordinates when `None`).
pub fn power_iteration<O: Objective + ?Sized>(
    obj: &O,
    theta: &[f64],
    support: Option<&[bool]>,
    opts: SharpnessOptions,
) -> Result<SharpnessEstimate> {
    let n = obj.dim();
    if theta.len() != n || support.is_some_and(|s| s.len() != n) {
        return Err(Error::Shape("theta or support length differs from the objective".into()));
    }
    if opts.max_iters == 0 || !(opts.tol > 0.0) {
        return Err(Error::invalid("max_iters", "max_iters and tol must be positive"));
    }
    let keep = |i: usize| support.is_none_or(|s| s[i]);
    let mut rng = rng_for(opts.seed);
    let mut v: Vec<f64> = (0..n)
        .map(|i| if keep(i) { rng.sample(StandardNormal) } else { 0.0 })
        .collect();
    if normalize(&mut v) == 0.0 {
        return Err(Error::Degenerate("empty support".into()));
    }
    let eps = sharpness_eps(theta);
    let mut lambda = f64::NAN;
    let mut residual = f64::INFINITY;
    for it in 1..=opts.max_iters {
        let mut hv = hvp_fd(obj, theta, &v, eps)?;
        for (i, x) in hv.iter_mut().enumerate() {
            if !keep(i) {
                *x = 0.0;
            }
        }
        let next: f64 = v.iter().zip(&hv).map(|(a, b)| a * b).sum();
        if lambda.is_finite() {
            residual = (next - lambda).abs() / next.abs().max(f64::MIN_POSITIVE);
        }
        lambda = next;
        if normalize(&mut hv) == 0.0 {
            return Ok(SharpnessEstimate {
                lambda_max: 0.0,
                iterations: it,
                residual: 0.0,
                converged: true,
            });
        }
        v = hv;
        if residual < opts.tol {
            return Ok(SharpnessEstimate {
                lambda_max: lambda,
                iterations: it,
                residual,
                converged: true,
            });
        }
    }
    Ok(SharpnessEstimate {
        lambda_max: lambda,
        iterations: opts.max_iters,
        residual,
        converged: false,
    })
}

/// Top Hessian eigenvalue of the training loss of `net` on `batch`, restricted to `support`.
pub fn sharpness(
    net: &SmallNet,
    batch: &DenseTensor,
    targets: &Targets,
    support: Option<Vec<bool>>,
    opts: SharpnessOptions,
) -> Result<SharpnessEstimate> {
    let obj = NetObjective::new(net, batch, targets);
    let obj = match support.clone() {
        Some(s) => obj.with_support(s)?,
        None => obj,
    };
    power_iteration(&obj, &net.params_flat(), support.as_deref(), opts)
}

/// Dense Hessian assembled column by column from finite-difference products, symmetrized.
pub fn dense_hessian<O: Objective + ?Sized>(obj: &O, theta: &[f64], eps: f64) -> Result<Vec<f64>> {
    let n = obj.dim();
    let mut h = vec![0.0; n * n];
    let mut e = vec![0.0; n];
    for j in 0..n {
        e[j] = 1.0;
        let col = hvp_fd(obj, theta, &e, eps)?;
        for i in 0..n {
            h[i * n + j] = col[i];
        }
        e[j] = 0.0;
    }
    for i in 0..n {
        for j in 0..i {
            let s = 0.5 * (h[i * n + j] + h[j * n + i]);
            h[i * n + j] = s;
            h[j * n + i] = s;
        }
    }
    Ok(h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Quadratic;

    #[test]
    fn diagonal_quadratic() {
        let q = Quadratic::diagonal(&[1.0, 2.0]);
        let est = power_iteration(&q, &[0.0, 0.0], None, SharpnessOptions::default()).unwrap();
        assert!(est.converged);
        assert!((est.lambda_max - 2.0).abs() < 1e-6);
    }

    #[test]
    fn support_restricts_the_spectrum() {
        let q = Quadratic::diagonal(&[1.0, 5.0, 2.0]);
        let est = power_iteration(&q, &[0.0; 3], Some(&[true, false, true]), SharpnessOptions::default()).unwrap();
        assert!((est.lambda_max - 2.0).abs() < 1e-6);
    }
}
