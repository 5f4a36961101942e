use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use super::config::ExperimentConfig;
use super::csv_out::emit_csv;
use super::exec::Execution;
use super::experiments::{execute, Artifacts};
use crate::error::{Error, Result};

/// Environment variable that overrides the configured output root.
pub const OUT_ENV: &str = "SIGNLAB_OUT";
pub const DEFAULT_OUT: &str = "results";

/// Output root: explicit override, then `SIGNLAB_OUT`, then the config's `out_dir`, then `results`.
pub fn resolve_out_root(explicit: Option<&Path>, config: &ExperimentConfig) -> PathBuf {
    if let Some(p) = explicit {
        return p.to_path_buf();
    }
    if let Some(env) = std::env::var_os(OUT_ENV).filter(|v| !v.is_empty()) {
        return PathBuf::from(env);
    }
    config.out_dir.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
}

#[derive(Clone, Debug)]
pub struct RunReport {
    pub dir: PathBuf,
    pub digest: String,
    pub files: Vec<PathBuf>,
    pub summary: Value,
}

fn write_json(path: &Path, value: &Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Runs the experiment and writes `<root>/<name>/<digest>/{runs.csv, summary.json, config.json}`.
///
/// The digest covers the experiment name, seed and the parameters exactly as given;
/// `config.json` also records the resolved parameters with every default spelled out.
pub fn run_experiment(config: &ExperimentConfig, out_root: &Path, exec: Execution) -> Result<RunReport> {
    let Artifacts { tables, summary, params } = execute(config, exec)?;
    let digest = config.digest();
    let dir = out_root.join(&config.experiment).join(config.short_digest());
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let mut files = Vec::new();
    for (name, table) in &tables {
        let path = dir.join(name);
        emit_csv(table, &path)?;
        files.push(path);
    }
    let summary = json!({
        "experiment": config.experiment,
        "seed": config.seed,
        "digest": digest,
        "results": summary,
    });
    let summary_path = dir.join("summary.json");
    write_json(&summary_path, &summary)?;
    files.push(summary_path);
    let config_path = dir.join("config.json");
    let recorded = json!({
        "experiment": config.experiment,
        "seed": config.seed,
        "params": Value::Object(config.params.clone()),
        "resolved_params": Value::Object(params),
        "digest": digest,
    });
    write_json(&config_path, &recorded)?;
    files.push(config_path);
    Ok(RunReport {
        dir,
        digest,
        files,
        summary,
    })
}
