use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::data::{Dataset, Split};
use super::flips::FlipStats;
use super::mask::MaskSpec;
use super::sharpness::{sharpness, SharpnessEstimate, SharpnessOptions};
use crate::autodiff::{accuracy, loss_and_grads, loss_value, sgd_update, SmallNet};
use crate::error::{Error, Result};
use crate::harness::{rng_for, substream};
use crate::reparam::{frobenius_decay_grads, merge, reparam_grads, rescale, ReparamSchedule, SignInLayer};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr: f64,
    pub epochs: usize,
    /// Plain mode only.
    pub weight_decay: f64,
    /// Sign-In mode only: `λ Σ (m⊙w)²`.
    pub frobenius_decay: f64,
    pub batch_size: usize,
    pub schedule: ReparamSchedule,
    /// Epoch of the warmup sign snapshot; `None` means `⌈T/10⌉`.
    pub warmup_epoch: Option<usize>,
    /// Measure sharpness every this many epochs (`0`: only after the last epoch).
    pub sharpness_every: usize,
    /// Training points used for sharpness (the first ones of the shuffled split).
    pub sharpness_samples: usize,
    pub sharpness: SharpnessOptions,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 0.05,
            epochs: 30,
            weight_decay: 1e-4,
            frobenius_decay: 1e-4,
            batch_size: 64,
            schedule: ReparamSchedule {
                period: 1,
                stop_epoch: 30,
                beta: 1.0,
            },
            warmup_epoch: None,
            sharpness_every: 0,
            sharpness_samples: 512,
            sharpness: SharpnessOptions::default(),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn warmup(&self) -> usize {
        self.warmup_epoch.unwrap_or(self.epochs.div_ceil(10))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::invalid("lr", "must be positive"));
        }
        if self.epochs == 0 {
            return Err(Error::invalid("epochs", "must be positive"));
        }
        if !(self.weight_decay >= 0.0) || !(self.frobenius_decay >= 0.0) {
            return Err(Error::invalid("weight_decay", "decays must be nonnegative"));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch_size", "must be positive"));
        }
        self.schedule.validate()?;
        if self.schedule.stop_epoch > self.epochs {
            return Err(Error::invalid("stop_epoch", "must not exceed the number of epochs"));
        }
        if self.warmup() >= self.epochs {
            return Err(Error::invalid("warmup_epoch", "must come before the last epoch"));
        }
        if self.sharpness_samples == 0 {
            return Err(Error::invalid("sharpness_samples", "must be positive"));
        }
        Ok(())
    }
}

/// Metrics after one epoch (epoch 0 is the initial state).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub test_loss: f64,
    pub test_accuracy: f64,
    pub flips_epoch: usize,
    pub flip_frac_cum: f64,
    /// Dominant `|λ|` of the loss Hessian on the probe batch, when measured this epoch.
    pub sharpness: Option<f64>,
    /// Fraction of exactly-zero weights in the merged net.
    pub sparsity: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Merged weights; off-support entries are exactly zero.
    pub net: SmallNet,
    pub metrics: Vec<EpochMetrics>,
    pub flips: FlipStats,
    pub final_sharpness: SharpnessEstimate,
}

impl TrainOutcome {
    pub fn final_metrics(&self) -> &EpochMetrics {
        self.metrics.last().expect("at least the initial row")
    }
}

fn weights_flat(net: &SmallNet) -> Vec<f64> {
    net.layers().iter().flat_map(|l| l.weight.values().iter().copied()).collect()
}

fn zero_fraction(net: &SmallNet) -> f64 {
    let w = weights_flat(net);
    w.iter().filter(|&&x| x == 0.0).count() as f64 / w.len() as f64
}

fn evaluate(net: &SmallNet, split: &Split) -> Result<(f64, f64)> {
    Ok((loss_value(net, &split.x, &split.targets())?, accuracy(net, &split.x, &split.labels)?))
}

fn measure_sharpness(net: &SmallNet, probe: &Split, mask: &MaskSpec, opts: SharpnessOptions) -> Result<SharpnessEstimate> {
    let support = mask.param_support(net)?;
    sharpness(net, &probe.x, &probe.targets(), Some(support), opts)
}

/// Trains `net` on the fixed `mask` with minibatch SGD.
///
/// Plain mode masks the weight gradients and applies weight decay. Sign-In mode
/// holds each weight matrix as balanced factors, descends on both factors with
/// Frobenius decay on their product, and restores the balance at the start of
/// every epoch the schedule selects. Biases stay dense and plain in both modes.
pub fn train_sparse(net: &SmallNet, mask: &MaskSpec, data: &Dataset, cfg: &TrainConfig, signin: bool) -> Result<TrainOutcome> {
    cfg.validate()?;
    mask.check_net(net)?;
    if data.input_dim() != net.input_dim() {
        return Err(Error::Shape("dataset and network input dimensions differ".into()));
    }
    let mut net = net.clone();
    mask.apply(&mut net)?;
    let mut factors: Option<Vec<SignInLayer>> = if signin {
        Some(
            net.layers()
                .iter()
                .zip(mask.layers())
                .map(|(l, m)| {
                    SignInLayer::from_weights(l.weight.shape().to_vec(), l.weight.values(), Some(m.clone()), cfg.schedule.beta)
                })
                .collect::<Result<_>>()?,
        )
    } else {
        None
    };
    let flat_mask = mask.flat();
    let mut flips = FlipStats::new(&weights_flat(&net), flat_mask.clone())?;
    let probe_len = cfg.sharpness_samples.min(data.train.len());
    let probe = data.train.subset(&(0..probe_len).collect::<Vec<_>>());
    let mut rng = rng_for(substream(cfg.seed, 7));
    let warmup = cfg.warmup();
    let n = data.train.len();
    let mut order: Vec<usize> = (0..n).collect();

    let mut metrics = Vec::with_capacity(cfg.epochs + 1);
    let (trl, tra) = evaluate(&net, &data.train)?;
    let (tel, tea) = evaluate(&net, &data.test)?;
    metrics.push(EpochMetrics {
        epoch: 0,
        train_loss: trl,
        train_accuracy: tra,
        test_loss: tel,
        test_accuracy: tea,
        flips_epoch: 0,
        flip_frac_cum: 0.0,
        sharpness: None,
        sparsity: zero_fraction(&net),
    });
    let mut last_sharpness = None;

    for epoch in 1..=cfg.epochs {
        if let Some(layers) = factors.as_mut() {
            if cfg.schedule.should_rescale(epoch) {
                for layer in layers.iter_mut() {
                    *layer = rescale(layer);
                }
            }
        }
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch_size) {
            let batch = data.train.subset(chunk);
            let (_, grads) = loss_and_grads(&net, &batch.x, &batch.targets())?;
            match factors.as_mut() {
                None => {
                    for (li, (layer, m)) in net.layers_mut().iter_mut().zip(mask.layers()).enumerate() {
                        let mut g = grads.weights[li].values().to_vec();
                        for (gi, &keep) in g.iter_mut().zip(m) {
                            if !keep {
                                *gi = 0.0;
                            }
                        }
                        sgd_update(layer.weight.values_mut(), &g, cfg.lr, cfg.weight_decay)?;
                        if let (Some(b), Some(gb)) = (layer.bias.as_mut(), grads.biases[li].as_ref()) {
                            sgd_update(b, gb, cfg.lr, cfg.weight_decay)?;
                        }
                    }
                }
                Some(layers) => {
                    for (li, (layer, fl)) in net.layers_mut().iter_mut().zip(layers.iter_mut()).enumerate() {
                        let (mut gm, mut gw) = reparam_grads(fl, grads.weights[li].values())?;
                        let (dm, dw) = frobenius_decay_grads(fl, cfg.frobenius_decay)?;
                        gm.iter_mut().zip(&dm).for_each(|(g, d)| *g += d);
                        gw.iter_mut().zip(&dw).for_each(|(g, d)| *g += d);
                        fl.step(&gm, &gw, cfg.lr);
                        layer.weight.values_mut().copy_from_slice(&merge(fl));
                        if let (Some(b), Some(gb)) = (layer.bias.as_mut(), grads.biases[li].as_ref()) {
                            sgd_update(b, gb, cfg.lr, 0.0)?;
                        }
                    }
                }
            }
        }
        if !net.layers().iter().all(|l| l.weight.is_finite()) {
            return Err(Error::Degenerate(format!("weights diverged in epoch {epoch}")));
        }
        let ef = flips.observe(epoch, &weights_flat(&net))?.clone();
        if epoch == warmup {
            flips.mark_warmup();
        }
        let sharp = if epoch == cfg.epochs || (cfg.sharpness_every > 0 && epoch % cfg.sharpness_every == 0) {
            let est = measure_sharpness(&net, &probe, mask, cfg.sharpness)?;
            last_sharpness = Some(est);
            Some(est.magnitude())
        } else {
            None
        };
        let (trl, tra) = evaluate(&net, &data.train)?;
        let (tel, tea) = evaluate(&net, &data.test)?;
        metrics.push(EpochMetrics {
            epoch,
            train_loss: trl,
            train_accuracy: tra,
            test_loss: tel,
            test_accuracy: tea,
            flips_epoch: ef.flips,
            flip_frac_cum: ef.cumulative_fraction,
            sharpness: sharp,
            sparsity: zero_fraction(&net),
        });
    }
    Ok(TrainOutcome {
        net,
        metrics,
        flips,
        final_sharpness: last_sharpness.expect("the last epoch always measures sharpness"),
    })
}
