//! Stable direction of the Sign-In flow at the origin, closed form against the linearized field.

use signlab::neuron::{angle_between, saddle_jacobian, stable_eigenvector, stable_manifold_direction, FlowMethod};

fn main() -> signlab::Result<()> {
    for (b1, b2) in [(2.0, 1.0), (4.0, 1.0), (1.0, 3.0)] {
        let analytic = stable_manifold_direction(b1, b2)?;
        println!("beta=({b1}, {b2}) closed form {analytic:.6?}");
        for method in [FlowMethod::SignIn, FlowMethod::SignInFactored] {
            let j = saddle_jacobian(b1, b2, 0.5, method)?;
            let (lambda, v) = stable_eigenvector(j)?;
            println!(
                "  {method:?}: lambda={lambda:.4} v={v:.6?} angle={:.2e}",
                angle_between(analytic, v)
            );
        }
    }
    Ok(())
}
