//! Masks from the three generators at the same sparsity, with per-layer kept counts.

use signlab::autodiff::{Loss, ParamKind, SmallNet};
use signlab::harness::rng_for;
use signlab::sparse::{layer_sizes, random_balanced_mask, snip_mask, synflow_mask, two_moons};

fn main() -> signlab::Result<()> {
    let sizes = [2, 32, 32, 2];
    let net = SmallNet::init(&sizes, Loss::CrossEntropy, ParamKind::Plain, &mut rng_for(0))?;
    let data = two_moons(128, 16, 0.1, 0)?;
    let s = 0.9;
    let masks = [
        random_balanced_mask(&layer_sizes(&net), s, 0)?,
        snip_mask(&net, &data.train.x, &data.train.targets(), s)?,
        synflow_mask(&net, s, 20)?,
    ];
    for m in masks {
        println!(
            "{:>16}: kept {:?} of {:?}, sparsity {:.4}",
            m.generator.as_str(),
            m.kept_per_layer(),
            layer_sizes(&net),
            m.achieved_sparsity()
        );
    }
    Ok(())
}
