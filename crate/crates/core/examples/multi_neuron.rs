//! Three-neuron student-teacher runs: good signs, bad signs, and bad signs with Sign-In.

use signlab::harness::seed_spawn;
use signlab::neuron::{multineuron_train, MultiNeuronConfig, StudentSigns, TrainMethod};

fn main() -> signlab::Result<()> {
    let seed = seed_spawn(0, 1);
    for (signs, method) in [
        (StudentSigns::Good, TrainMethod::Standard),
        (StudentSigns::Bad, TrainMethod::Standard),
        (StudentSigns::Bad, TrainMethod::SignIn),
    ] {
        let cfg = MultiNeuronConfig { signs, method, seed, ..MultiNeuronConfig::default() };
        let res = multineuron_train(&cfg)?;
        println!("{signs:?}/{method:?}: final loss {:.3e}", res.final_loss);
        println!("  teacher a {:.3?}", res.teacher.a);
        println!("  student a {:.3?}", res.final_a);
    }
    Ok(())
}
