use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::autodiff::{loss_and_grads, loss_value, sgd_step, DenseTensor, Layer, Loss, ParamKind, SmallNet, Targets};
use crate::error::{Error, Result};
use crate::harness::{rng_for, substream};
use crate::reparam::{merge, reparam_grads, rescale, SignInLayer};

/// Antisymmetric outer-layer init: entries `N(0, 1/d)` with `a_i = −a_{i+k/2}`.
pub fn cob_init(k: usize, d: usize, seed: u64) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    if k == 0 || k % 2 != 0 {
        return Err(Error::invalid("k", format!("must be even and positive (got {k})")));
    }
    if d == 0 {
        return Err(Error::invalid("d", "must be positive"));
    }
    let mut rng = rng_for(seed);
    let std = (1.0 / d as f64).sqrt();
    let half: Vec<f64> = (0..k / 2).map(|_| std * rng.sample::<f64, _>(StandardNormal)).collect();
    let a: Vec<f64> = half.iter().copied().chain(half.iter().map(|x| -x)).collect();
    let w = (0..k)
        .map(|_| (0..d).map(|_| std * rng.sample::<f64, _>(StandardNormal)).collect())
        .collect();
    Ok((a, w))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StudentSigns {
    /// Every student weight shares the sign of its teacher counterpart.
    Good,
    /// As `Good` but with all outer weights positive.
    Bad,
    /// Dense antisymmetric init; any student width.
    Cob,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrainMethod {
    Standard,
    SignIn,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultiNeuronConfig {
    pub k_student: usize,
    pub k_teacher: usize,
    pub d: usize,
    pub signs: StudentSigns,
    pub method: TrainMethod,
    pub lr: f64,
    pub epochs: usize,
    /// Sign-In scaling of the outer weights.
    pub beta: f64,
    /// Sign-In scaling of the hidden weights; recovery of an outer sign needs `beta_inner < beta`.
    pub beta_inner: f64,
    pub n_samples: usize,
    /// Magnitude scale of the sign-aligned init (entries `scale·|N(0, 1/d)|`).
    pub init_scale: f64,
    /// `Some(r)` sets `|a_i| = r·‖w_i‖` (`r = 1` is balanced); `None` draws `|a_i|`
    /// independently like every other weight.
    pub outer_ratio: Option<f64>,
    /// Give inner weights the teacher's signs (otherwise random signs).
    pub align_inner: bool,
    /// Restore the Sign-In balance every this many epochs (`0` never).
    pub rescale_every: usize,
    pub seed: u64,
    pub record_every: usize,
}

impl Default for MultiNeuronConfig {
    fn default() -> Self {
        Self {
            k_student: 3,
            k_teacher: 3,
            d: 2,
            signs: StudentSigns::Good,
            method: TrainMethod::Standard,
            lr: 0.1,
            epochs: 40_000,
            beta: 2.0,
            beta_inner: 0.5,
            n_samples: 256,
            init_scale: 1.0,
            outer_ratio: Some(1.0),
            align_inner: true,
            rescale_every: 0,
            seed: 0,
            record_every: 100,
        }
    }
}

impl MultiNeuronConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k_teacher == 0 || self.k_student == 0 || self.d == 0 || self.n_samples == 0 {
            return Err(Error::invalid("k_student", "widths, d and n_samples must be positive"));
        }
        if self.signs != StudentSigns::Cob && self.k_student != self.k_teacher {
            return Err(Error::invalid("k_student", "sign-aligned students need k_student = k_teacher"));
        }
        if !(self.lr > 0.0) || self.epochs == 0 || self.record_every == 0 {
            return Err(Error::invalid("lr", "lr, epochs and record_every must be positive"));
        }
        if !(self.beta > 0.0) || !(self.beta_inner > 0.0) || !(self.init_scale > 0.0) || self.outer_ratio.is_some_and(|r| !(r > 0.0)) {
            return Err(Error::invalid("beta", "beta, init_scale and outer_ratio must be positive"));
        }
        Ok(())
    }
}

/// Teacher with Rademacher outer weights (at least one negative) and unit-norm rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultiTeacher {
    pub a: Vec<f64>,
    pub w: Vec<Vec<f64>>,
}

impl MultiTeacher {
    pub fn sample<R: Rng + ?Sized>(k: usize, d: usize, rng: &mut R) -> Self {
        let a = loop {
            let a: Vec<f64> = (0..k).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect();
            // An all-positive teacher makes the bad-sign student coincide with the good one.
            if a.iter().any(|&x| x < 0.0) {
                break a;
            }
        };
        let w = (0..k)
            .map(|_| loop {
                let row: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
                let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
                if norm > 1e-12 {
                    break row.into_iter().map(|x| x / norm).collect();
                }
            })
            .collect();
        Self { a, w }
    }

    pub fn eval(&self, z: &[f64]) -> f64 {
        self.a
            .iter()
            .zip(&self.w)
            .map(|(a, w)| a * w.iter().zip(z).map(|(x, y)| x * y).sum::<f64>().max(0.0))
            .sum()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultiNeuronResult {
    pub teacher: MultiTeacher,
    pub init_a: Vec<f64>,
    pub init_w: Vec<Vec<f64>>,
    pub final_a: Vec<f64>,
    pub final_w: Vec<Vec<f64>>,
    /// `(epoch, loss)` every `record_every` epochs and at the end.
    pub loss_curve: Vec<(usize, f64)>,
    pub final_loss: f64,
}

impl MultiNeuronResult {
    /// Each student neuron drawn as `|a_i|·w_i`.
    pub fn representations(&self) -> Vec<Vec<f64>> {
        self.final_a
            .iter()
            .zip(&self.final_w)
            .map(|(a, w)| w.iter().map(|x| a.abs() * x).collect())
            .collect()
    }
}

fn aligned_init<R: Rng + ?Sized>(teacher: &MultiTeacher, cfg: &MultiNeuronConfig, rng: &mut R) -> (Vec<f64>, Vec<Vec<f64>>) {
    let std = cfg.init_scale / (cfg.d as f64).sqrt();
    let w: Vec<Vec<f64>> = teacher
        .w
        .iter()
        .map(|row| {
            row.iter()
                .map(|&t| {
                    let neg = if cfg.align_inner { t < 0.0 } else { rng.random::<bool>() };
                    let x = std * rng.sample::<f64, _>(StandardNormal).abs();
                    if neg {
                        -x
                    } else {
                        x
                    }
                })
                .collect()
        })
        .collect();
    let a = teacher
        .a
        .iter()
        .zip(&w)
        .map(|(&t, row)| {
            let size = match cfg.outer_ratio {
                Some(r) => r * row.iter().map(|x| x * x).sum::<f64>().sqrt(),
                None => std * rng.sample::<f64, _>(StandardNormal).abs(),
            };
            match cfg.signs {
                StudentSigns::Bad => size,
                _ => t.signum() * size,
            }
        })
        .collect();
    (a, w)
}

/// Full-batch gradient descent of a two-layer ReLU student on teacher labels.
pub fn multineuron_train(cfg: &MultiNeuronConfig) -> Result<MultiNeuronResult> {
    cfg.validate()?;
    let mut teacher_rng = rng_for(substream(cfg.seed, 0));
    let teacher = MultiTeacher::sample(cfg.k_teacher, cfg.d, &mut teacher_rng);
    let mut data_rng = rng_for(substream(cfg.seed, 1));
    let z: Vec<f64> = (0..cfg.n_samples * cfg.d).map(|_| data_rng.sample(StandardNormal)).collect();
    let y: Vec<f64> = z.chunks(cfg.d).map(|row| teacher.eval(row)).collect();
    let batch = DenseTensor::new(vec![cfg.n_samples, cfg.d], z)?;
    let targets = Targets::Values(DenseTensor::new(vec![cfg.n_samples, 1], y)?);

    let (a0, w0) = match cfg.signs {
        StudentSigns::Cob => cob_init(cfg.k_student, cfg.d, substream(cfg.seed, 2))?,
        _ => aligned_init(&teacher, cfg, &mut rng_for(substream(cfg.seed, 2))),
    };
    let kind = match cfg.method {
        TrainMethod::Standard => ParamKind::Plain,
        TrainMethod::SignIn => ParamKind::SignIn,
    };
    let hidden = DenseTensor::from_rows(&w0)?;
    let outer = DenseTensor::new(vec![1, cfg.k_student], a0.clone())?;
    let mut net = SmallNet::new(
        vec![Layer::new(hidden, None, kind)?, Layer::new(outer, None, kind)?],
        Loss::Mse,
    )?;
    let mut factors = match cfg.method {
        TrainMethod::SignIn => Some(
            net.layers()
                .iter()
                .zip([cfg.beta_inner, cfg.beta])
                .map(|(l, beta)| SignInLayer::from_weights(l.weight.shape().to_vec(), l.weight.values(), None, beta))
                .collect::<Result<Vec<_>>>()?,
        ),
        TrainMethod::Standard => None,
    };

    let mut curve = Vec::with_capacity(cfg.epochs / cfg.record_every + 2);
    for epoch in 0..cfg.epochs {
        if let Some(layers) = factors.as_mut() {
            if cfg.rescale_every > 0 && epoch > 0 && epoch % cfg.rescale_every == 0 {
                for layer in layers.iter_mut() {
                    *layer = rescale(layer);
                }
            }
        }
        let (loss, grads) = loss_and_grads(&net, &batch, &targets)?;
        if !loss.is_finite() {
            return Err(Error::Degenerate(format!("loss diverged at epoch {epoch}")));
        }
        if epoch % cfg.record_every == 0 {
            curve.push((epoch, loss));
        }
        match factors.as_mut() {
            None => sgd_step(&mut net, &grads, cfg.lr, 0.0)?,
            Some(layers) => {
                for (idx, layer) in layers.iter_mut().enumerate() {
                    let (gm, gw) = reparam_grads(layer, grads.weights[idx].values())?;
                    layer.step(&gm, &gw, cfg.lr);
                    net.layers_mut()[idx].weight.values_mut().copy_from_slice(&merge(layer));
                }
            }
        }
    }
    let final_loss = loss_value(&net, &batch, &targets)?;
    curve.push((cfg.epochs, final_loss));
    let final_w = (0..cfg.k_student).map(|i| net.layers()[0].weight.row(i).to_vec()).collect();
    let final_a = net.layers()[1].weight.values().to_vec();
    Ok(MultiNeuronResult {
        teacher,
        init_a: a0,
        init_w: w0,
        final_a,
        final_w,
        loss_curve: curve,
        final_loss,
    })
}
