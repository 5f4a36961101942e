//! Configuration, seeding and CSV/JSON emission for reproducible experiment runs.

pub mod config;
pub mod csv_out;
pub mod exec;
pub mod experiments;
pub mod run;
pub mod seed;

pub use config::{check_experiment, parse_params, ExperimentConfig, EXPERIMENTS};
pub use csv_out::{emit_csv, format_float, Cell, CsvTable};
pub use exec::{map_runs, Execution};
pub use experiments::{accepts_runs, execute, sparse_summary, Artifacts};
pub use run::{resolve_out_root, run_experiment, RunReport, DEFAULT_OUT, OUT_ENV};
pub use seed::{rng_for, seed_spawn, substream};
