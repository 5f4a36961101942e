//! Top Hessian eigenvalue of a small net by power iteration, next to the dense finite-difference Hessian.

use signlab::autodiff::{Loss, NetObjective, ParamKind, SmallNet};
use signlab::harness::rng_for;
use signlab::sparse::{dense_hessian, gaussian_mixture, sharpness, sharpness_eps, SharpnessOptions};

fn main() -> signlab::Result<()> {
    let net = SmallNet::init(&[3, 6, 2], Loss::CrossEntropy, ParamKind::Plain, &mut rng_for(0))?;
    let data = gaussian_mixture(64, 2, 2, 3, 0.7, 1)?;
    let targets = data.train.targets();
    let est = sharpness(&net, &data.train.x, &targets, None, SharpnessOptions::default())?;
    println!(
        "power iteration: lambda={:.6} after {} iterations (converged {})",
        est.lambda_max, est.iterations, est.converged
    );

    let theta = net.params_flat();
    let obj = NetObjective::new(&net, &data.train.x, &targets);
    let h = dense_hessian(&obj, &theta, sharpness_eps(&theta))?;
    println!("dense Hessian has {} entries; diagonal head {:.4?}", h.len(), &h[..4]);
    Ok(())
}
