//! Success fraction per initial sign quadrant for the four student families.
//!
//! `cargo run --release --example quadrant_table -- 20` uses 20 runs per cell (default 100).

use signlab::harness::Execution;
use signlab::neuron::{quadrant_sweep, Quadrant, SweepConfig, SweepMethod};

fn main() -> signlab::Result<()> {
    let runs = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(100);
    let cfg = SweepConfig { runs, ..SweepConfig::default() };
    let res = quadrant_sweep(&cfg, Execution::Parallel)?;
    print!("{:>20}", "");
    for q in Quadrant::ALL {
        print!("{:>8}", q.as_str());
    }
    println!();
    for (method, row) in res.table(&SweepMethod::ALL) {
        print!("{:>20}", method.as_str());
        for f in row {
            print!("{f:>8.2}");
        }
        println!();
    }
    Ok(())
}
