use std::cmp::Ordering;

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::autodiff::{loss_and_grads, mlp_backward, mlp_forward, DenseTensor, SmallNet, Targets};
use crate::error::{Error, Result};
use crate::harness::rng_for;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MaskGenerator {
    RandomBalanced,
    Snip,
    Synflow,
}

impl MaskGenerator {
    pub fn as_str(self) -> &'static str {
        match self {
            MaskGenerator::RandomBalanced => "random-balanced",
            MaskGenerator::Snip => "snip",
            MaskGenerator::Synflow => "synflow",
        }
    }
}

/// Fixed per-layer binary masks over the weight matrices (biases stay dense).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaskSpec {
    masks: Vec<Vec<bool>>,
    pub sparsity: f64,
    pub generator: MaskGenerator,
    pub seed: Option<u64>,
}

impl MaskSpec {
    pub fn dense(layer_sizes: &[usize]) -> Self {
        Self {
            masks: layer_sizes.iter().map(|&n| vec![true; n]).collect(),
            sparsity: 0.0,
            generator: MaskGenerator::RandomBalanced,
            seed: None,
        }
    }

    pub fn layers(&self) -> &[Vec<bool>] {
        &self.masks
    }

    pub fn kept_per_layer(&self) -> Vec<usize> {
        self.masks.iter().map(|m| m.iter().filter(|&&k| k).count()).collect()
    }

    pub fn kept(&self) -> usize {
        self.kept_per_layer().iter().sum()
    }

    pub fn total(&self) -> usize {
        self.masks.iter().map(Vec::len).sum()
    }

    /// Fraction of masked-out weights.
    pub fn achieved_sparsity(&self) -> f64 {
        1.0 - self.kept() as f64 / self.total() as f64
    }

    /// All layers concatenated.
    pub fn flat(&self) -> Vec<bool> {
        self.masks.concat()
    }

    /// Errors unless layer `l` of the mask has as many entries as weight `l` of `net`.
    pub fn check_net(&self, net: &SmallNet) -> Result<()> {
        let sizes: Vec<usize> = net.layers().iter().map(|l| l.weight.len()).collect();
        let ours: Vec<usize> = self.masks.iter().map(Vec::len).collect();
        if sizes != ours {
            return Err(Error::Shape(format!("mask layer sizes {ours:?} do not match network {sizes:?}")));
        }
        Ok(())
    }

    /// Support over the flattened parameter vector of `net` (weights masked, biases kept).
    pub fn param_support(&self, net: &SmallNet) -> Result<Vec<bool>> {
        self.check_net(net)?;
        let mut out = Vec::with_capacity(net.num_params());
        for (layer, mask) in net.layers().iter().zip(&self.masks) {
            out.extend_from_slice(mask);
            if let Some(b) = &layer.bias {
                out.extend(std::iter::repeat_n(true, b.len()));
            }
        }
        Ok(out)
    }

    /// Zeroes masked-out weights of `net` in place.
    pub fn apply(&self, net: &mut SmallNet) -> Result<()> {
        self.check_net(net)?;
        for (layer, mask) in net.layers_mut().iter_mut().zip(&self.masks) {
            for (v, &keep) in layer.weight.values_mut().iter_mut().zip(mask) {
                if !keep {
                    *v = 0.0;
                }
            }
        }
        Ok(())
    }
}

pub fn layer_sizes(net: &SmallNet) -> Vec<usize> {
    net.layers().iter().map(|l| l.weight.len()).collect()
}

fn check_sparsity(s: f64) -> Result<()> {
    if !(0.0..1.0).contains(&s) {
        return Err(Error::invalid("sparsity", format!("must lie in [0, 1), got {s}")));
    }
    Ok(())
}

/// Number of weights kept out of `total` at sparsity `s`.
pub fn kept_count(total: usize, s: f64) -> Result<usize> {
    check_sparsity(s)?;
    Ok(((total as f64) * (1.0 - s)).round() as usize)
}

/// Equal share of `keep` per layer. The remainder goes to the largest layers,
/// and a share larger than its layer is capped with the excess redistributed
/// among the remaining layers by the same rule.
pub fn balanced_counts(sizes: &[usize], keep: usize) -> Result<Vec<usize>> {
    let total: usize = sizes.iter().sum();
    if sizes.is_empty() || keep < sizes.len() {
        return Err(Error::invalid("sparsity", format!("keeping {keep} weights leaves some of {} layers empty", sizes.len())));
    }
    if keep > total {
        return Err(Error::invalid("sparsity", "more weights kept than exist"));
    }
    let mut counts = vec![0usize; sizes.len()];
    let mut open: Vec<usize> = (0..sizes.len()).collect();
    // Largest layers first; ties by index.
    open.sort_by(|&a, &b| sizes[b].cmp(&sizes[a]).then(a.cmp(&b)));
    let mut remaining = keep;
    loop {
        let share = remaining / open.len();
        let extra = remaining % open.len();
        for (rank, &l) in open.iter().enumerate() {
            counts[l] = share + usize::from(rank < extra);
        }
        let over: Vec<usize> = open.iter().copied().filter(|&l| counts[l] > sizes[l]).collect();
        if over.is_empty() {
            return Ok(counts);
        }
        for &l in &over {
            counts[l] = sizes[l];
            remaining -= sizes[l];
        }
        open.retain(|l| !over.contains(l));
    }
}

/// Uniformly placed positions with balanced per-layer counts.
pub fn random_balanced_mask(layer_sizes: &[usize], s: f64, seed: u64) -> Result<MaskSpec> {
    let total: usize = layer_sizes.iter().sum();
    let keep = kept_count(total, s)?;
    let counts = balanced_counts(layer_sizes, keep)?;
    let mut rng = rng_for(seed);
    let masks = layer_sizes
        .iter()
        .zip(&counts)
        .map(|(&n, &k)| {
            let mut m = vec![false; n];
            for i in sample(&mut rng, n, k) {
                m[i] = true;
            }
            m
        })
        .collect();
    Ok(MaskSpec {
        masks,
        sparsity: s,
        generator: MaskGenerator::RandomBalanced,
        seed: Some(seed),
    })
}

/// Keeps the `keep` highest scores; ties by larger `magnitude`, then lower index.
/// Entries with `eligible = false` are never kept.
pub fn top_k(scores: &[f64], magnitude: &[f64], eligible: &[bool], keep: usize) -> Vec<bool> {
    let mut idx: Vec<usize> = (0..scores.len()).filter(|&i| eligible[i]).collect();
    idx.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .unwrap_or(Ordering::Equal)
            .then(magnitude[b].partial_cmp(&magnitude[a]).unwrap_or(Ordering::Equal))
            .then(a.cmp(&b))
    });
    let mut out = vec![false; scores.len()];
    for &i in idx.iter().take(keep) {
        out[i] = true;
    }
    out
}

fn split_layers(flat: Vec<bool>, sizes: &[usize]) -> Vec<Vec<bool>> {
    let mut out = Vec::with_capacity(sizes.len());
    let mut at = 0;
    for &n in sizes {
        out.push(flat[at..at + n].to_vec());
        at += n;
    }
    out
}

fn weights_flat(net: &SmallNet) -> Vec<f64> {
    net.layers().iter().flat_map(|l| l.weight.values().iter().copied()).collect()
}

/// Saliency `|θ ⊙ ∇θ L|` on one batch, global top-k over the weights.
pub fn snip_scores(net: &SmallNet, batch: &DenseTensor, targets: &Targets) -> Result<Vec<f64>> {
    let (_, grads) = loss_and_grads(net, batch, targets)?;
    Ok(net
        .layers()
        .iter()
        .zip(&grads.weights)
        .flat_map(|(l, g)| l.weight.values().iter().zip(g.values()).map(|(t, g)| (t * g).abs()).collect::<Vec<_>>())
        .collect())
}

pub fn snip_mask(net: &SmallNet, batch: &DenseTensor, targets: &Targets, s: f64) -> Result<MaskSpec> {
    let sizes = layer_sizes(net);
    let keep = kept_count(sizes.iter().sum(), s)?;
    let scores = snip_scores(net, batch, targets)?;
    if scores.iter().all(|&x| x == 0.0) {
        return Err(Error::Degenerate("all saliency scores are zero; the batch carries no signal".into()));
    }
    let magnitude: Vec<f64> = weights_flat(net).iter().map(|x| x.abs()).collect();
    let flat = top_k(&scores, &magnitude, &vec![true; scores.len()], keep);
    Ok(MaskSpec {
        masks: split_layers(flat, &sizes),
        sparsity: s,
        generator: MaskGenerator::Snip,
        seed: None,
    })
}

/// Scores `|θ ⊙ ∂R/∂θ|` with `R = 1ᵀ(∏ₗ|Wₗ ⊙ Mₗ|)1`, for the current masks.
pub fn synflow_scores(net: &SmallNet, masks: &[Vec<bool>]) -> Result<Vec<f64>> {
    let mut abs_net = net.clone();
    for (layer, mask) in abs_net.layers_mut().iter_mut().zip(masks) {
        layer.bias = None;
        for (v, &keep) in layer.weight.values_mut().iter_mut().zip(mask) {
            *v = if keep { v.abs() } else { 0.0 };
        }
    }
    let ones = DenseTensor::new(vec![1, abs_net.input_dim()], vec![1.0; abs_net.input_dim()])?;
    let (_, cache) = mlp_forward(&abs_net, &ones)?;
    let seed = DenseTensor::new(vec![1, abs_net.output_dim()], vec![1.0; abs_net.output_dim()])?;
    let grads = mlp_backward(&abs_net, &cache, &seed)?;
    Ok(abs_net
        .layers()
        .iter()
        .zip(&grads.weights)
        .flat_map(|(l, g)| l.weight.values().iter().zip(g.values()).map(|(t, g)| t * g).collect::<Vec<_>>())
        .collect())
}

/// Data-free iterative pruning on synaptic flow with an exponential schedule:
/// round `r` keeps `total·(1−s)^{r/rounds}` weights.
pub fn synflow_mask(net: &SmallNet, s: f64, rounds: usize) -> Result<MaskSpec> {
    if rounds == 0 {
        return Err(Error::invalid("rounds", "must be at least 1"));
    }
    let sizes = layer_sizes(net);
    let total: usize = sizes.iter().sum();
    let keep = kept_count(total, s)?;
    let magnitude: Vec<f64> = weights_flat(net).iter().map(|x| x.abs()).collect();
    let mut flat = vec![true; total];
    for r in 1..=rounds {
        let target = if r == rounds {
            keep
        } else {
            ((total as f64) * (1.0 - s).powf(r as f64 / rounds as f64)).round() as usize
        };
        let masks = split_layers(flat.clone(), &sizes);
        let scores = synflow_scores(net, &masks)?;
        flat = top_k(&scores, &magnitude, &flat, target.max(keep));
    }
    Ok(MaskSpec {
        masks: split_layers(flat, &sizes),
        sparsity: s,
        generator: MaskGenerator::Synflow,
        seed: None,
    })
}
