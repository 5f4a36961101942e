//! Fraction of five-input students started with `a < 0` that end with the right sign.

use signlab::harness::Execution;
use signlab::neuron::{multi_input_recovery, RecoveryConfig};

fn main() -> signlab::Result<()> {
    for sign_in in [false, true] {
        let cfg = RecoveryConfig { runs: 50, ..RecoveryConfig::new(0.01, sign_in) };
        let res = multi_input_recovery(&cfg, Execution::Parallel)?;
        println!("sign_in={sign_in}: {:.0}% recovered over {} runs", 100.0 * res.fraction, cfg.runs);
    }
    Ok(())
}
