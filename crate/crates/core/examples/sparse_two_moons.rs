//! Plain vs Sign-In training of a 90%-sparse MLP on two moons, with both re-initialization arms.

use signlab::harness::{sparse_summary, Execution};
use signlab::sparse::{run_suite, SuiteConfig};

fn main() -> signlab::Result<()> {
    let cfg = SuiteConfig { seeds: 2, ..SuiteConfig::default() };
    let res = run_suite(&cfg, Execution::Parallel)?;
    let summary = sparse_summary(&res);
    for (arm, stats) in summary["arms"].as_object().expect("arms") {
        println!(
            "{arm:>14}: test acc {:.4}  flips {:.4}",
            stats["test_accuracy_mean"].as_f64().unwrap_or(f64::NAN),
            stats["flip_frac_cum_mean"].as_f64().unwrap_or(f64::NAN),
        );
    }
    println!("checks {}", summary["checks"]);
    Ok(())
}
