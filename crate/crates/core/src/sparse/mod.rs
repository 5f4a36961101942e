//! Desk-scale sparse training under fixed masks, with sign and sharpness instrumentation.

pub mod data;
pub mod flips;
pub mod flops;
pub mod mask;
pub mod reinit;
pub mod sharpness;
pub mod suite;
pub mod train;

pub use data::{default_two_moons, gaussian_mixture, two_moons, Dataset, Split};
pub use flips::{flip_fraction, perturb_signs, sign_of, signs, EpochFlips, FlipStats};
pub use flops::{flop_count, FlopMode, LayerDescr};
pub use mask::{
    balanced_counts, kept_count, layer_sizes, random_balanced_mask, snip_mask, snip_scores, synflow_mask,
    synflow_scores, top_k, MaskGenerator, MaskSpec,
};
pub use reinit::{reinit_experiment, InitDistribution, ReinitMode};
pub use sharpness::{dense_hessian, power_iteration, sharpness, sharpness_eps, SharpnessEstimate, SharpnessOptions};
pub use suite::{mean_std, run_suite, Arm, SeedRuns, SuiteConfig, SuiteResult, TaskKind, TaskSpec};
pub use train::{train_sparse, EpochMetrics, TrainConfig, TrainOutcome};
