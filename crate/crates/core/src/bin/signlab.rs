use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use signlab::harness::{accepts_runs, resolve_out_root, run_experiment, Execution, ExperimentConfig, EXPERIMENTS};
use signlab::Error;

#[derive(Parser)]
#[command(name = "signlab", version, about = "Run sign-flip experiments and write their CSV/JSON artifacts")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the registered experiments.
    List,
    #[command(external_subcommand)]
    Run(Vec<String>),
}

#[derive(Parser)]
#[command(name = "signlab <experiment>", no_binary_name = true)]
struct RunArgs {
    experiment: String,
    /// JSON config; its `experiment` field must match (or be omitted in favour of the argument).
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Output root (takes precedence over SIGNLAB_OUT and the config).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    runs: Option<usize>,
    /// Run repetitions one after another instead of on the thread pool.
    #[arg(long)]
    serial: bool,
}

fn load(args: &RunArgs) -> Result<ExperimentConfig, Error> {
    let text = std::fs::read_to_string(&args.config).map_err(|e| Error::InvalidParameter {
        key: "--config".into(),
        reason: format!("{}: {e}", args.config.display()),
    })?;
    let mut value: serde_json::Value = serde_json::from_str(&text)?;
    if let Some(obj) = value.as_object_mut() {
        obj.entry("experiment").or_insert_with(|| args.experiment.clone().into());
    }
    let mut cfg = ExperimentConfig::from_json(&value.to_string())?;
    if cfg.experiment != args.experiment {
        return Err(Error::InvalidParameter {
            key: "experiment".into(),
            reason: format!("config is for `{}`, command asked for `{}`", cfg.experiment, args.experiment),
        });
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(runs) = args.runs {
        if !accepts_runs(&cfg.experiment) {
            return Err(Error::InvalidParameter {
                key: "runs".into(),
                reason: format!("`{}` has no repetitions", cfg.experiment),
            });
        }
        cfg.params.insert("runs".into(), runs.into());
    }
    Ok(cfg)
}

fn run(args: RunArgs) -> Result<(), Error> {
    signlab::harness::check_experiment(&args.experiment)?;
    let cfg = load(&args)?;
    let root = resolve_out_root(args.out.as_deref(), &cfg);
    let exec = if args.serial { Execution::Serial } else { Execution::Parallel };
    let report = run_experiment(&cfg, &root, exec)?;
    println!("{}", report.dir.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match cli.command {
        Command::List => {
            for name in EXPERIMENTS {
                println!("{name}");
            }
            ExitCode::SUCCESS
        }
        Command::Run(raw) => {
            let args = match RunArgs::try_parse_from(raw) {
                Ok(a) => a,
                Err(e) => {
                    let _ = e.print();
                    return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
                }
            };
            match run(args) {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(if e.is_config_error() { 1 } else { 2 })
                }
            }
        }
    }
}
