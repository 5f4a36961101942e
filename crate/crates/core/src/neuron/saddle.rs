//! Linear analysis of the single-neuron flow at the saddle `(a, w₁) = (0, 0)`.

use super::field::{closed_form, FlowMethod};
use crate::error::{Error, Result};

fn check_betas(beta1: f64, beta2: f64) -> Result<()> {
    for (name, b) in [("beta1", beta1), ("beta2", beta2)] {
        if !(b > 0.0 && b.is_finite()) {
            return Err(Error::invalid(name, "must be positive"));
        }
    }
    Ok(())
}

fn unit_upper(x: f64, y: f64) -> [f64; 2] {
    let n = x.hypot(y);
    let s = if y < 0.0 || (y == 0.0 && x < 0.0) { -1.0 } else { 1.0 };
    [s * x / n, s * y / n]
}

/// Closed-form stable direction `(−sqrt(β₁/β₂), 1)`, normalized.
pub fn stable_manifold_direction(beta1: f64, beta2: f64) -> Result<[f64; 2]> {
    check_betas(beta1, beta2)?;
    Ok(unit_upper(-(beta1 / beta2).sqrt(), 1.0))
}

/// Jacobian of the flow field at the origin by central differences.
pub fn saddle_jacobian(beta1: f64, beta2: f64, c: f64, method: FlowMethod) -> Result<[[f64; 2]; 2]> {
    check_betas(beta1, beta2)?;
    if !(c > 0.0) {
        return Err(Error::invalid("c", "must be positive"));
    }
    let h = 1e-6;
    let f = |a: f64, w: f64| closed_form(a, w, c, beta1, beta2, method);
    let (pa, pw) = (f(h, 0.0), f(-h, 0.0));
    let (qa, qw) = (f(0.0, h), f(0.0, -h));
    Ok([
        [(pa.0 - pw.0) / (2.0 * h), (qa.0 - qw.0) / (2.0 * h)],
        [(pa.1 - pw.1) / (2.0 * h), (qa.1 - qw.1) / (2.0 * h)],
    ])
}

/// Unit eigenvector of a real 2×2 matrix for its most negative eigenvalue,
/// oriented with a nonnegative second component.
pub fn stable_eigenvector(j: [[f64; 2]; 2]) -> Result<(f64, [f64; 2])> {
    let tr = j[0][0] + j[1][1];
    let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
    let disc = tr * tr / 4.0 - det;
    if disc < 0.0 {
        return Err(Error::Degenerate("complex eigenvalues: no stable direction".into()));
    }
    let lambda = tr / 2.0 - disc.sqrt();
    if !(lambda < 0.0) {
        return Err(Error::Degenerate("no negative eigenvalue".into()));
    }
    // Rows of (J − λI) annihilate the eigenvector; use the better-conditioned one.
    let r0 = (j[0][0] - lambda, j[0][1]);
    let r1 = (j[1][0], j[1][1] - lambda);
    let v = if r0.0.hypot(r0.1) >= r1.0.hypot(r1.1) {
        (-r0.1, r0.0)
    } else {
        (-r1.1, r1.0)
    };
    Ok((lambda, unit_upper(v.0, v.1)))
}

/// Stable direction of the field `method` at the origin, found numerically.
pub fn numeric_stable_direction(beta1: f64, beta2: f64, method: FlowMethod) -> Result<[f64; 2]> {
    let j = saddle_jacobian(beta1, beta2, 1.0, method)?;
    Ok(stable_eigenvector(j)?.1)
}

/// Angle in radians between two unit vectors.
pub fn angle_between(u: [f64; 2], v: [f64; 2]) -> f64 {
    let cross = u[0] * v[1] - u[1] * v[0];
    let dot = u[0] * v[0] + u[1] * v[1];
    cross.atan2(dot).abs()
}
