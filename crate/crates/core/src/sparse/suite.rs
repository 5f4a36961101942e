use serde::{Deserialize, Serialize};

use super::data::{gaussian_mixture, two_moons, Dataset};
use super::mask::{layer_sizes, random_balanced_mask, snip_mask, synflow_mask, MaskGenerator, MaskSpec};
use super::reinit::{reinit_experiment, InitDistribution, ReinitMode};
use super::train::{train_sparse, TrainConfig, TrainOutcome};
use crate::autodiff::{Loss, ParamKind, SmallNet};
use crate::error::{Error, Result};
use crate::harness::{map_runs, rng_for, seed_spawn, substream, Execution};

/// One training arm of the comparison.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Arm {
    Plain,
    SignIn,
    /// Plain training from the plain arm's final mask and signs with fresh magnitudes.
    ReinitSigns,
    /// Plain training from a fully random init on the same mask.
    ReinitRandom,
}

impl Arm {
    pub const ALL: [Arm; 4] = [Arm::Plain, Arm::SignIn, Arm::ReinitSigns, Arm::ReinitRandom];

    pub fn as_str(self) -> &'static str {
        match self {
            Arm::Plain => "plain",
            Arm::SignIn => "sign-in",
            Arm::ReinitSigns => "reinit-signs",
            Arm::ReinitRandom => "reinit-random",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TaskKind {
    TwoMoons,
    GaussianMixture,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub kind: TaskKind,
    pub n_train: usize,
    pub n_test: usize,
    /// Label noise scale for two-moons, cluster spread for the mixture.
    pub noise: f64,
    /// Mixture only.
    pub classes: usize,
    /// Mixture only.
    pub dim: usize,
}

impl Default for TaskSpec {
    fn default() -> Self {
        Self {
            kind: TaskKind::TwoMoons,
            n_train: 2000,
            n_test: 1000,
            noise: 0.1,
            classes: 10,
            dim: 10,
        }
    }
}

impl TaskSpec {
    pub fn build(&self, seed: u64) -> Result<Dataset> {
        match self.kind {
            TaskKind::TwoMoons => two_moons(self.n_train, self.n_test, self.noise, seed),
            TaskKind::GaussianMixture => {
                gaussian_mixture(self.n_train, self.n_test, self.classes, self.dim, self.noise, seed)
            }
        }
    }

    fn io_dims(&self) -> (usize, usize) {
        match self.kind {
            TaskKind::TwoMoons => (2, 2),
            TaskKind::GaussianMixture => (self.dim, self.classes),
        }
    }
}

/// Plain vs Sign-In training (plus the re-initialization arms) over several seeds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteConfig {
    pub seeds: usize,
    pub hidden: Vec<usize>,
    pub sparsity: f64,
    pub generator: MaskGenerator,
    pub task: TaskSpec,
    pub train: TrainConfig,
    /// Also run the two re-initialization arms.
    pub reinit: bool,
    pub reinit_init: InitDistribution,
    pub seed: u64,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            seeds: 5,
            hidden: vec![64, 64],
            sparsity: 0.9,
            generator: MaskGenerator::RandomBalanced,
            task: TaskSpec::default(),
            train: TrainConfig::default(),
            reinit: true,
            reinit_init: InitDistribution::HeNormal,
            seed: 0,
        }
    }
}

impl SuiteConfig {
    pub fn arms(&self) -> Vec<Arm> {
        if self.reinit {
            Arm::ALL.to_vec()
        } else {
            vec![Arm::Plain, Arm::SignIn]
        }
    }

    pub fn sizes(&self) -> Vec<usize> {
        let (i, o) = self.task.io_dims();
        std::iter::once(i).chain(self.hidden.iter().copied()).chain(std::iter::once(o)).collect()
    }
}

#[derive(Clone, Debug)]
pub struct SeedRuns {
    pub index: usize,
    pub seed: u64,
    pub mask: MaskSpec,
    pub arms: Vec<(Arm, TrainOutcome)>,
}

impl SeedRuns {
    pub fn get(&self, arm: Arm) -> Option<&TrainOutcome> {
        self.arms.iter().find(|(a, _)| *a == arm).map(|(_, o)| o)
    }
}

#[derive(Clone, Debug)]
pub struct SuiteResult {
    pub runs: Vec<SeedRuns>,
    pub warmup: usize,
}

/// Mean and population standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
    (m, v.sqrt())
}

impl SuiteResult {
    fn collect(&self, arm: Arm, f: impl Fn(&TrainOutcome) -> f64) -> Vec<f64> {
        self.runs.iter().filter_map(|r| r.get(arm)).map(f).collect()
    }

    pub fn final_accuracies(&self, arm: Arm) -> Vec<f64> {
        self.collect(arm, |o| o.final_metrics().test_accuracy)
    }

    pub fn final_sharpness(&self, arm: Arm) -> Vec<f64> {
        self.collect(arm, |o| o.final_sharpness.magnitude())
    }

    pub fn final_flip_fraction(&self, arm: Arm) -> Vec<f64> {
        self.collect(arm, |o| o.final_metrics().flip_frac_cum)
    }

    /// Seed-mean cumulative flip fraction per epoch (index 0 is the init).
    pub fn mean_flip_curve(&self, arm: Arm) -> Vec<f64> {
        let curves: Vec<Vec<f64>> = self
            .runs
            .iter()
            .filter_map(|r| r.get(arm))
            .map(|o| o.metrics.iter().map(|m| m.flip_frac_cum).collect())
            .collect();
        let Some(len) = curves.first().map(Vec::len) else {
            return Vec::new();
        };
        (0..len)
            .map(|e| curves.iter().map(|c| c[e]).sum::<f64>() / curves.len() as f64)
            .collect()
    }

    /// True when the mean curve of `a` lies strictly above that of `b` at every epoch after warmup.
    pub fn flips_exceed_after_warmup(&self, a: Arm, b: Arm) -> bool {
        let (ca, cb) = (self.mean_flip_curve(a), self.mean_flip_curve(b));
        !ca.is_empty() && (self.warmup + 1..ca.len()).all(|e| ca[e] > cb[e])
    }
}

fn build_mask(cfg: &SuiteConfig, net: &SmallNet, data: &Dataset, seed: u64) -> Result<MaskSpec> {
    match cfg.generator {
        MaskGenerator::RandomBalanced => random_balanced_mask(&layer_sizes(net), cfg.sparsity, seed),
        MaskGenerator::Snip => {
            let n = data.train.len().min(256);
            let batch = data.train.subset(&(0..n).collect::<Vec<_>>());
            snip_mask(net, &batch.x, &batch.targets(), cfg.sparsity)
        }
        MaskGenerator::Synflow => synflow_mask(net, cfg.sparsity, 100),
    }
}

/// Runs every arm for `cfg.seeds` seeds. Both main arms share data, init, mask and
/// batch order; the re-init arms start from the plain arm's final checkpoint.
pub fn run_suite(cfg: &SuiteConfig, exec: Execution) -> Result<SuiteResult> {
    if cfg.seeds == 0 {
        return Err(Error::invalid("seeds", "must be positive"));
    }
    if cfg.hidden.contains(&0) {
        return Err(Error::invalid("hidden", "layer widths must be positive"));
    }
    cfg.train.validate()?;
    let sizes = cfg.sizes();
    let runs = map_runs(cfg.seeds, exec, |i| -> Result<SeedRuns> {
        let seed = seed_spawn(cfg.seed, i as u64);
        let data = cfg.task.build(substream(seed, 0))?;
        let net = SmallNet::init(&sizes, Loss::CrossEntropy, ParamKind::Plain, &mut rng_for(substream(seed, 1)))?
            .with_zero_biases();
        let mask = build_mask(cfg, &net, &data, substream(seed, 2))?;
        let train = TrainConfig {
            seed: substream(seed, 3),
            ..cfg.train.clone()
        };
        let plain = train_sparse(&net, &mask, &data, &train, false)?;
        let signin = train_sparse(&net, &mask, &data, &train, true)?;
        let mut arms = Vec::with_capacity(4);
        if cfg.reinit {
            let rseed = substream(seed, 4);
            for (arm, mode) in [
                (Arm::ReinitSigns, ReinitMode::SignsRandomMagnitude),
                (Arm::ReinitRandom, ReinitMode::FullyRandom),
            ] {
                let start = reinit_experiment(&mask, &plain.net, mode, cfg.reinit_init, rseed)?;
                arms.push((arm, train_sparse(&start, &mask, &data, &train, false)?));
            }
        }
        arms.insert(0, (Arm::SignIn, signin));
        arms.insert(0, (Arm::Plain, plain));
        Ok(SeedRuns { index: i, seed, mask, arms })
    });
    Ok(SuiteResult {
        runs: runs.into_iter().collect::<Result<_>>()?,
        warmup: cfg.train.warmup(),
    })
}
