//! Run one experiment through the harness and list what it wrote.

use signlab::harness::{run_experiment, Execution, ExperimentConfig};

fn main() -> signlab::Result<()> {
    let out = std::env::temp_dir().join("signlab-example");
    let cfg = ExperimentConfig::new("flops", 0);
    let report = run_experiment(&cfg, &out, Execution::Parallel)?;
    println!("wrote to {}", report.dir.display());
    for f in &report.files {
        println!("  {}", f.display());
    }
    println!("{}", serde_json::to_string_pretty(&report.summary)?);
    Ok(())
}
