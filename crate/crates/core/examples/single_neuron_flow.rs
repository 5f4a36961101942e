//! Standard and Sign-In gradient descent from a wrong outer sign on the one-input student.

use signlab::neuron::{flow_integrate, FlowMethod, NeuronFlowConfig};

fn main() -> signlab::Result<()> {
    for method in [FlowMethod::Standard, FlowMethod::SignIn, FlowMethod::SignInFactored] {
        let mut cfg = NeuronFlowConfig::new(-0.9, vec![0.9], method);
        (cfg.beta1, cfg.beta2) = (2.0, 1.0);
        cfg.record_every = 2_000;
        let trace = flow_integrate(&cfg)?;
        println!("{method:?}: {} after {} steps", trace.outcome, trace.steps);
        for ((t, a), (w, l)) in trace.times.iter().zip(&trace.a).zip(trace.w.iter().zip(&trace.losses)) {
            println!("  t={t:>7.2} a={a:>8.4} w={:>8.4} loss={l:.3e}", w[0]);
        }
    }
    Ok(())
}
