use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Single-neuron teacher `ã σ(w̃ᵀz)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Teacher {
    pub a: f64,
    pub w: Vec<f64>,
}

impl Teacher {
    /// `ã = a`, `w̃ = (1/a, 0, …, 0)`.
    pub fn canonical(a: f64, d: usize) -> Result<Self> {
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::invalid("teacher_a", "must be positive"));
        }
        if d == 0 {
            return Err(Error::invalid("d", "must be at least 1"));
        }
        let mut w = vec![0.0; d];
        w[0] = 1.0 / a;
        Ok(Self { a, w })
    }

    pub fn dim(&self) -> usize {
        self.w.len()
    }

    pub fn eval(&self, z: &[f64]) -> f64 {
        self.a * relu(dot(&self.w, z))
    }

    /// `ã·w̃₁`, the product a student must reproduce on the first coordinate.
    pub fn product(&self) -> f64 {
        self.a * self.w[0]
    }
}

/// Inputs stored row-major (`n × d`) with teacher labels.
#[derive(Clone, Debug, PartialEq)]
pub struct NeuronData {
    pub n: usize,
    pub d: usize,
    pub z: Vec<f64>,
    pub y: Vec<f64>,
}

impl NeuronData {
    pub fn new(d: usize, z: Vec<f64>, teacher: &Teacher) -> Result<Self> {
        if d == 0 || z.len() % d != 0 || z.is_empty() {
            return Err(Error::Shape(format!("{} inputs cannot form rows of width {d}", z.len())));
        }
        if teacher.dim() != d {
            return Err(Error::Shape("teacher dimension differs from data".into()));
        }
        let y = z.chunks(d).map(|r| teacher.eval(r)).collect();
        Ok(Self { n: z.len() / d, d, z, y })
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.z[i * self.d..(i + 1) * self.d]
    }

    /// `C = (1/n) Σ max(0, z₁)²`, the curvature of the closed-form field.
    pub fn curvature(&self) -> f64 {
        (0..self.n).map(|i| relu(self.z[i * self.d]).powi(2)).sum::<f64>() / self.n as f64
    }

    /// True when no sample has a positive first coordinate (C = 0).
    pub fn all_first_nonpositive(&self) -> bool {
        (0..self.n).all(|i| self.z[i * self.d] <= 0.0)
    }
}

/// `n` i.i.d. standard normal inputs in `ℝ^d` labelled by the teacher.
pub fn sample_teacher_data<R: Rng + ?Sized>(n: usize, d: usize, teacher: &Teacher, rng: &mut R) -> Result<NeuronData> {
    if n == 0 {
        return Err(Error::invalid("n", "must be at least 1"));
    }
    let z: Vec<f64> = (0..n * d).map(|_| rng.sample(StandardNormal)).collect();
    NeuronData::new(d, z, teacher)
}

#[inline]
pub(crate) fn relu(x: f64) -> f64 {
    x.max(0.0)
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
