use std::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::autodiff::{DenseTensor, Targets};
use crate::error::{Error, Result};
use crate::harness::rng_for;

/// A labeled classification split.
#[derive(Clone, Debug, PartialEq)]
pub struct Split {
    pub x: DenseTensor,
    pub labels: Vec<usize>,
}

impl Split {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn targets(&self) -> Targets {
        Targets::Classes(self.labels.clone())
    }

    /// Rows `idx` as a new split.
    pub fn subset(&self, idx: &[usize]) -> Split {
        let d = self.x.cols();
        let mut values = Vec::with_capacity(idx.len() * d);
        let mut labels = Vec::with_capacity(idx.len());
        for &i in idx {
            values.extend_from_slice(self.x.row(i));
            labels.push(self.labels[i]);
        }
        Split {
            x: DenseTensor::new(vec![idx.len(), d], values).expect("rows come from a valid tensor"),
            labels,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub train: Split,
    pub test: Split,
    pub classes: usize,
}

impl Dataset {
    pub fn input_dim(&self) -> usize {
        self.train.x.cols()
    }
}

fn moons<R: Rng + ?Sized>(n: usize, noise: f64, rng: &mut R) -> Result<Split> {
    if n < 2 {
        return Err(Error::invalid("n", "need at least two points"));
    }
    let jitter = Normal::new(0.0, noise).map_err(|e| Error::invalid("noise", e.to_string()))?;
    let upper = n / 2;
    let mut rows: Vec<([f64; 2], usize)> = Vec::with_capacity(n);
    for i in 0..n {
        let (class, k, count) = if i < upper { (0, i, upper) } else { (1, i - upper, n - upper) };
        let t = if count > 1 { PI * k as f64 / (count - 1) as f64 } else { 0.0 };
        let (x, y) = if class == 0 {
            (t.cos(), t.sin())
        } else {
            (1.0 - t.cos(), 0.5 - t.sin())
        };
        rows.push(([x + jitter.sample(rng), y + jitter.sample(rng)], class));
    }
    rows.shuffle(rng);
    let values = rows.iter().flat_map(|(p, _)| p.iter().copied()).collect();
    Ok(Split {
        x: DenseTensor::new(vec![n, 2], values)?,
        labels: rows.into_iter().map(|(_, c)| c).collect(),
    })
}

/// Two interleaved half-moons with isotropic Gaussian noise.
pub fn two_moons(n_train: usize, n_test: usize, noise: f64, seed: u64) -> Result<Dataset> {
    if !(noise >= 0.0) {
        return Err(Error::invalid("noise", "must be nonnegative"));
    }
    let mut rng = rng_for(seed);
    Ok(Dataset {
        train: moons(n_train, noise, &mut rng)?,
        test: moons(n_test, noise, &mut rng)?,
        classes: 2,
    })
}

/// Default desk-scale task: 2000 training and 1000 test points, noise 0.1.
pub fn default_two_moons(seed: u64) -> Result<Dataset> {
    two_moons(2000, 1000, 0.1, seed)
}

/// Isotropic Gaussian blobs around random unit-scale centers.
pub fn gaussian_mixture(n_train: usize, n_test: usize, classes: usize, d: usize, spread: f64, seed: u64) -> Result<Dataset> {
    if classes < 2 || d == 0 || n_train == 0 || n_test == 0 {
        return Err(Error::invalid("classes", "need ≥ 2 classes, d ≥ 1 and nonempty splits"));
    }
    if !(spread > 0.0) {
        return Err(Error::invalid("spread", "must be positive"));
    }
    let mut rng = rng_for(seed);
    let centers: Vec<Vec<f64>> = (0..classes)
        .map(|_| (0..d).map(|_| 2.0 * rng.sample::<f64, _>(StandardNormal)).collect())
        .collect();
    let draw = |n: usize, rng: &mut rand_chacha::ChaCha8Rng| -> Result<Split> {
        let mut values = Vec::with_capacity(n * d);
        let mut labels = Vec::with_capacity(n);
        for i in 0..n {
            let c = i % classes;
            for &m in &centers[c] {
                values.push(m + spread * rng.sample::<f64, _>(StandardNormal));
            }
            labels.push(c);
        }
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(rng);
        let split = Split {
            x: DenseTensor::new(vec![n, d], values)?,
            labels,
        };
        Ok(split.subset(&idx))
    };
    let train = draw(n_train, &mut rng)?;
    let test = draw(n_test, &mut rng)?;
    Ok(Dataset { train, test, classes })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moons_are_balanced_and_reproducible() {
        let a = default_two_moons(3).unwrap();
        let b = default_two_moons(3).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.train.len(), 2000);
        assert_eq!(a.test.len(), 1000);
        assert_eq!(a.train.labels.iter().filter(|&&c| c == 1).count(), 1000);
    }

    #[test]
    fn noiseless_moons_lie_on_arcs() {
        let d = two_moons(50, 10, 0.0, 0).unwrap();
        for i in 0..d.train.len() {
            let p = d.train.x.row(i);
            let r = if d.train.labels[i] == 0 {
                p[0].hypot(p[1])
            } else {
                (p[0] - 1.0).hypot(p[1] - 0.5)
            };
            assert!((r - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn mixture_shapes() {
        let d = gaussian_mixture(100, 50, 10, 4, 0.5, 1).unwrap();
        assert_eq!(d.train.x.shape(), &[100, 4]);
        assert!(d.test.labels.iter().all(|&c| c < 10));
    }
}
