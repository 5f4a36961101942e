//! Split a few weights into Sign-In factors, take a step, and rescale back onto the balance.

use signlab::reparam::{merge, reparam_grads, rescale, SignInLayer};

fn main() -> signlab::Result<()> {
    let x = [-1.5, -0.2, 0.0, 0.7, 3.0];
    let beta = 1.0;
    let mut layer = SignInLayer::from_weights(vec![x.len()], &x, None, beta)?;
    println!("m       {:?}", layer.m);
    println!("w       {:?}", layer.w);
    println!("m*w     {:?}", merge(&layer));
    println!("balance {:?}", layer.balance());

    // One step on L = ½‖θ − 1‖² moves the balance slightly.
    let g: Vec<f64> = merge(&layer).iter().map(|t| t - 1.0).collect();
    let (gm, gw) = reparam_grads(&layer, &g)?;
    layer.step(&gm, &gw, 0.1);
    println!("after step, balance {:?}", layer.balance());

    let fixed = rescale(&layer);
    println!("after rescale, balance {:?}", fixed.balance());
    println!("product kept: {:?} vs {:?}", merge(&layer), merge(&fixed));
    Ok(())
}
