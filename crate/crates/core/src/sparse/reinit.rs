use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::flips::sign_of;
use super::mask::MaskSpec;
use crate::autodiff::SmallNet;
use crate::error::{Error, Result};
use crate::harness::rng_for;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReinitMode {
    /// Checkpoint signs, freshly drawn magnitudes.
    SignsRandomMagnitude,
    /// Checkpoint magnitudes, Rademacher signs.
    MagnitudeRandomSigns,
    FullyRandom,
}

impl ReinitMode {
    pub const ALL: [ReinitMode; 3] = [
        ReinitMode::SignsRandomMagnitude,
        ReinitMode::MagnitudeRandomSigns,
        ReinitMode::FullyRandom,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ReinitMode::SignsRandomMagnitude => "signs+random-magnitude",
            ReinitMode::MagnitudeRandomSigns => "magnitude+random-signs",
            ReinitMode::FullyRandom => "fully-random",
        }
    }
}

/// Distribution of freshly drawn weights.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitDistribution {
    /// `N(0, 2/fan_in)` per layer.
    HeNormal,
    Normal { std: f64 },
}

impl InitDistribution {
    fn std(self, fan_in: usize) -> f64 {
        match self {
            InitDistribution::HeNormal => (2.0 / fan_in as f64).sqrt(),
            InitDistribution::Normal { std } => std,
        }
    }
}

/// Builds a fresh net on `mask` from a trained checkpoint. Off-support weights are
/// zero and biases restart at zero.
pub fn reinit_experiment(
    mask: &MaskSpec,
    checkpoint: &SmallNet,
    mode: ReinitMode,
    init: InitDistribution,
    seed: u64,
) -> Result<SmallNet> {
    mask.check_net(checkpoint)?;
    if let InitDistribution::Normal { std } = init {
        if !(std > 0.0) {
            return Err(Error::invalid("init_std", "must be positive"));
        }
    }
    let mut rng = rng_for(seed);
    let mut net = checkpoint.clone();
    for (layer, m) in net.layers_mut().iter_mut().zip(mask.layers()) {
        let std = init.std(layer.in_dim());
        for (v, &keep) in layer.weight.values_mut().iter_mut().zip(m) {
            // Draw for every coordinate so layouts with different masks share streams.
            let fresh: f64 = std * rng.sample::<f64, _>(StandardNormal);
            let coin: bool = rng.random();
            if !keep {
                *v = 0.0;
                continue;
            }
            let old = *v;
            *v = match mode {
                ReinitMode::SignsRandomMagnitude => f64::from(sign_of(old)) * fresh.abs(),
                ReinitMode::MagnitudeRandomSigns => if coin { old.abs() } else { -old.abs() },
                ReinitMode::FullyRandom => fresh,
            };
        }
        if let Some(b) = &mut layer.bias {
            b.iter_mut().for_each(|x| *x = 0.0);
        }
    }
    Ok(net)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::{Loss, ParamKind};
    use crate::sparse::flips::signs;
    use crate::sparse::mask::{layer_sizes, random_balanced_mask};

    fn setup() -> (SmallNet, MaskSpec) {
        let net = SmallNet::init(&[3, 8, 2], Loss::CrossEntropy, ParamKind::Plain, &mut rng_for(1)).unwrap();
        let mask = random_balanced_mask(&layer_sizes(&net), 0.5, 2).unwrap();
        (net, mask)
    }

    #[test]
    fn modes_copy_what_they_promise() {
        let (ckpt, mask) = setup();
        let flat_mask = mask.flat();
        let old: Vec<f64> = ckpt.layers().iter().flat_map(|l| l.weight.values().to_vec()).collect();
        let s = reinit_experiment(&mask, &ckpt, ReinitMode::SignsRandomMagnitude, InitDistribution::HeNormal, 5).unwrap();
        let m = reinit_experiment(&mask, &ckpt, ReinitMode::MagnitudeRandomSigns, InitDistribution::HeNormal, 5).unwrap();
        let sv: Vec<f64> = s.layers().iter().flat_map(|l| l.weight.values().to_vec()).collect();
        let mv: Vec<f64> = m.layers().iter().flat_map(|l| l.weight.values().to_vec()).collect();
        let (so, ss) = (signs(&old), signs(&sv));
        for i in 0..old.len() {
            if flat_mask[i] {
                assert_eq!(so[i], ss[i]);
                assert_eq!(mv[i].abs(), old[i].abs());
            } else {
                assert_eq!(sv[i], 0.0);
                assert_eq!(mv[i], 0.0);
            }
        }
    }

    #[test]
    fn fully_random_is_deterministic() {
        let (ckpt, mask) = setup();
        let a = reinit_experiment(&mask, &ckpt, ReinitMode::FullyRandom, InitDistribution::HeNormal, 9).unwrap();
        let b = reinit_experiment(&mask, &ckpt, ReinitMode::FullyRandom, InitDistribution::HeNormal, 9).unwrap();
        assert_eq!(a, b);
    }
}
