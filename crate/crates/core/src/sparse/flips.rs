use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::rng_for;

/// `+1` for `x ≥ 0` (zero counts as positive), `−1` otherwise.
pub fn sign_of(x: f64) -> i8 {
    if x >= 0.0 || x.is_nan() {
        1
    } else {
        -1
    }
}

pub fn signs(values: &[f64]) -> Vec<i8> {
    values.iter().map(|&x| sign_of(x)).collect()
}

fn check_congruent(a: usize, b: usize, mask: usize) -> Result<()> {
    if a != b || a != mask {
        return Err(Error::Shape(format!("sign vectors ({a}, {b}) and mask ({mask}) differ in length")));
    }
    Ok(())
}

/// Fraction of masked-in coordinates where the two sign vectors disagree.
pub fn flip_fraction(signs_a: &[i8], signs_b: &[i8], mask: &[bool]) -> Result<f64> {
    check_congruent(signs_a.len(), signs_b.len(), mask.len())?;
    let support = mask.iter().filter(|&&k| k).count();
    if support == 0 {
        return Err(Error::Degenerate("flip fraction over an empty mask".into()));
    }
    let flips = signs_a
        .iter()
        .zip(signs_b)
        .zip(mask)
        .filter(|((a, b), &keep)| keep && a != b)
        .count();
    Ok(flips as f64 / support as f64)
}

/// Flips exactly `round(fraction · support)` masked-in signs chosen uniformly.
pub fn perturb_signs(signs: &[i8], mask: &[bool], fraction: f64, seed: u64) -> Result<Vec<i8>> {
    check_congruent(signs.len(), signs.len(), mask.len())?;
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::invalid("fraction", format!("must lie in [0, 1], got {fraction}")));
    }
    let support: Vec<usize> = (0..mask.len()).filter(|&i| mask[i]).collect();
    let count = (fraction * support.len() as f64).round() as usize;
    let mut out = signs.to_vec();
    let mut rng = rng_for(seed);
    for pick in sample(&mut rng, support.len(), count) {
        let i = support[pick];
        out[i] = -out[i];
    }
    Ok(out)
}

/// Flip bookkeeping for one epoch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochFlips {
    pub epoch: usize,
    /// Masked-in coordinates whose sign changed since the previous epoch end.
    pub flips: usize,
    /// Fraction of masked-in coordinates that changed sign at least once so far.
    pub cumulative_fraction: f64,
}

/// Sign snapshots and flip counts over the mask support of one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlipStats {
    pub mask: Vec<bool>,
    pub init: Vec<i8>,
    pub warmup: Option<Vec<i8>>,
    pub last: Vec<i8>,
    /// Per-coordinate number of observed sign changes (nondecreasing over epochs).
    pub counts: Vec<u32>,
    pub epochs: Vec<EpochFlips>,
    ever: Vec<bool>,
    support: usize,
}

impl FlipStats {
    pub fn new(init_values: &[f64], mask: Vec<bool>) -> Result<Self> {
        check_congruent(init_values.len(), init_values.len(), mask.len())?;
        let support = mask.iter().filter(|&&k| k).count();
        if support == 0 {
            return Err(Error::Degenerate("flip statistics over an empty mask".into()));
        }
        let init = signs(init_values);
        Ok(Self {
            counts: vec![0; mask.len()],
            ever: vec![false; mask.len()],
            last: init.clone(),
            init,
            warmup: None,
            mask,
            epochs: Vec::new(),
            support,
        })
    }

    /// Records the signs at the end of `epoch`.
    pub fn observe(&mut self, epoch: usize, values: &[f64]) -> Result<&EpochFlips> {
        check_congruent(values.len(), values.len(), self.mask.len())?;
        let mut flips = 0;
        for (i, &v) in values.iter().enumerate() {
            if !self.mask[i] {
                continue;
            }
            let s = sign_of(v);
            if s != self.last[i] {
                flips += 1;
                self.counts[i] += 1;
                self.ever[i] = true;
                self.last[i] = s;
            }
        }
        let ever = self.ever.iter().filter(|&&e| e).count();
        self.epochs.push(EpochFlips {
            epoch,
            flips,
            cumulative_fraction: ever as f64 / self.support as f64,
        });
        Ok(self.epochs.last().expect("just pushed"))
    }

    pub fn mark_warmup(&mut self) {
        self.warmup = Some(self.last.clone());
    }

    pub fn init_vs_final(&self) -> f64 {
        flip_fraction(&self.init, &self.last, &self.mask).expect("validated at construction")
    }

    pub fn init_vs_warmup(&self) -> Option<f64> {
        self.warmup.as_ref().map(|w| flip_fraction(&self.init, w, &self.mask).expect("validated"))
    }

    pub fn warmup_vs_final(&self) -> Option<f64> {
        self.warmup.as_ref().map(|w| flip_fraction(w, &self.last, &self.mask).expect("validated"))
    }
}
