use super::mlp::{loss_and_grads, loss_value, SmallNet, Targets};
use super::tensor::DenseTensor;
use crate::error::{Error, Result};

/// A differentiable scalar function of a flat parameter vector.
pub trait Objective {
    fn dim(&self) -> usize;
    fn value(&self, theta: &[f64]) -> Result<f64>;
    fn gradient(&self, theta: &[f64]) -> Result<Vec<f64>>;
}

/// Training loss of a fixed network architecture on a fixed batch.
pub struct NetObjective<'a> {
    net: SmallNet,
    batch: &'a DenseTensor,
    targets: &'a Targets,
    /// When set, parameters outside the support are frozen (gradient zeroed).
    support: Option<Vec<bool>>,
}

impl<'a> NetObjective<'a> {
    pub fn new(net: &SmallNet, batch: &'a DenseTensor, targets: &'a Targets) -> Self {
        Self {
            net: net.clone(),
            batch,
            targets,
            support: None,
        }
    }

    pub fn with_support(mut self, support: Vec<bool>) -> Result<Self> {
        if support.len() != self.net.num_params() {
            return Err(Error::Shape("support length differs from parameter count".into()));
        }
        self.support = Some(support);
        Ok(self)
    }

    pub fn support(&self) -> Option<&[bool]> {
        self.support.as_deref()
    }

    fn at(&self, theta: &[f64]) -> Result<SmallNet> {
        let mut net = self.net.clone();
        net.set_params_flat(theta)?;
        Ok(net)
    }
}

impl Objective for NetObjective<'_> {
    fn dim(&self) -> usize {
        self.net.num_params()
    }

    fn value(&self, theta: &[f64]) -> Result<f64> {
        loss_value(&self.at(theta)?, self.batch, self.targets)
    }

    fn gradient(&self, theta: &[f64]) -> Result<Vec<f64>> {
        let (_, g) = loss_and_grads(&self.at(theta)?, self.batch, self.targets)?;
        let mut g = g.flatten();
        if let Some(s) = &self.support {
            for (gi, &keep) in g.iter_mut().zip(s) {
                if !keep {
                    *gi = 0.0;
                }
            }
        }
        Ok(g)
    }
}

/// `L(θ) = ½ θᵀAθ` for a symmetric `A` stored row-major.
#[derive(Clone, Debug)]
pub struct Quadratic {
    n: usize,
    a: Vec<f64>,
}

impl Quadratic {
    pub fn new(n: usize, a: Vec<f64>) -> Result<Self> {
        if a.len() != n * n {
            return Err(Error::Shape(format!("matrix needs {} entries", n * n)));
        }
        Ok(Self { n, a })
    }

    pub fn diagonal(d: &[f64]) -> Self {
        let n = d.len();
        let mut a = vec![0.0; n * n];
        for (i, v) in d.iter().enumerate() {
            a[i * n + i] = *v;
        }
        Self { n, a }
    }

    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.a[i * self.n..(i + 1) * self.n].iter().zip(v).map(|(x, y)| x * y).sum())
            .collect()
    }
}

impl Objective for Quadratic {
    fn dim(&self) -> usize {
        self.n
    }

    fn value(&self, theta: &[f64]) -> Result<f64> {
        Ok(0.5 * theta.iter().zip(self.matvec(theta)).map(|(t, g)| t * g).sum::<f64>())
    }

    fn gradient(&self, theta: &[f64]) -> Result<Vec<f64>> {
        if theta.len() != self.n {
            return Err(Error::Shape("parameter length mismatch".into()));
        }
        Ok(self.matvec(theta))
    }
}

/// Central-difference Hessian-vector product `(∇L(θ+εv) − ∇L(θ−εv)) / 2ε`.
pub fn hvp_fd<O: Objective + ?Sized>(obj: &O, theta: &[f64], direction: &[f64], eps: f64) -> Result<Vec<f64>> {
    if direction.len() != obj.dim() || theta.len() != obj.dim() {
        return Err(Error::Shape(format!(
            "direction/theta lengths ({}, {}) differ from parameter count {}",
            direction.len(),
            theta.len(),
            obj.dim()
        )));
    }
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::invalid("eps", "must be positive"));
    }
    if direction.iter().all(|&v| v == 0.0) {
        return Err(Error::Degenerate("zero direction".into()));
    }
    let plus: Vec<f64> = theta.iter().zip(direction).map(|(t, v)| t + eps * v).collect();
    let minus: Vec<f64> = theta.iter().zip(direction).map(|(t, v)| t - eps * v).collect();
    let gp = obj.gradient(&plus)?;
    let gm = obj.gradient(&minus)?;
    Ok(gp.iter().zip(&gm).map(|(a, b)| (a - b) / (2.0 * eps)).collect())
}
