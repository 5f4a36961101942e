use super::mlp::{GradStore, SmallNet};
use crate::error::{Error, Result};

/// `θ ← θ − lr·(g + weight_decay·θ)`, elementwise.
pub fn sgd_update(params: &mut [f64], grads: &[f64], lr: f64, weight_decay: f64) -> Result<()> {
    check_hyper(lr, weight_decay)?;
    if params.len() != grads.len() {
        return Err(Error::Shape(format!(
            "{} parameters but {} gradients",
            params.len(),
            grads.len()
        )));
    }
    for (p, g) in params.iter_mut().zip(grads) {
        *p -= lr * (g + weight_decay * *p);
    }
    Ok(())
}

pub fn sgd_step(net: &mut SmallNet, grads: &GradStore, lr: f64, weight_decay: f64) -> Result<()> {
    check_hyper(lr, weight_decay)?;
    if grads.weights.len() != net.layers().len() {
        return Err(Error::Shape("gradient store does not match network depth".into()));
    }
    for (layer, (gw, gb)) in net.layers_mut().iter_mut().zip(grads.weights.iter().zip(&grads.biases)) {
        if !layer.weight.same_shape(gw) {
            return Err(Error::Shape("weight gradient shape mismatch".into()));
        }
        sgd_update(layer.weight.values_mut(), gw.values(), lr, weight_decay)?;
        match (&mut layer.bias, gb) {
            (Some(b), Some(g)) => sgd_update(b, g, lr, weight_decay)?,
            (None, None) => {}
            _ => return Err(Error::Shape("bias presence differs between net and gradients".into())),
        }
    }
    Ok(())
}

fn check_hyper(lr: f64, weight_decay: f64) -> Result<()> {
    if !(lr > 0.0 && lr.is_finite()) {
        return Err(Error::invalid("lr", format!("must be positive, got {lr}")));
    }
    if !(weight_decay >= 0.0 && weight_decay.is_finite()) {
        return Err(Error::invalid("weight_decay", format!("must be nonnegative, got {weight_decay}")));
    }
    Ok(())
}
