use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Registered experiment names, in `signlab list` order.
pub const EXPERIMENTS: [&str; 8] = [
    "quadrant-sweep",
    "multi-input",
    "flow-trace",
    "multi-neuron",
    "sparse-train",
    "sharpness",
    "masks",
    "flops",
];

pub fn check_experiment(name: &str) -> Result<()> {
    if EXPERIMENTS.contains(&name) {
        Ok(())
    } else {
        Err(Error::UnknownExperiment {
            name: name.to_string(),
            valid: EXPERIMENTS.join(", "),
        })
    }
}

/// One experiment document: `{"experiment": ..., "seed": ..., "out_dir": ..., "params": {...}}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: String,
    #[serde(default)]
    pub seed: u64,
    /// Output root; the run writes to `<out_dir>/<experiment>/<digest>/`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub params: Map<String, Value>,
}

const TOP_LEVEL_KEYS: [&str; 4] = ["experiment", "seed", "out_dir", "params"];

impl ExperimentConfig {
    pub fn new(experiment: &str, seed: u64) -> Self {
        Self {
            experiment: experiment.to_string(),
            seed,
            out_dir: None,
            params: Map::new(),
        }
    }

    pub fn with_param(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.params.insert(key.to_string(), value.into());
        self
    }

    /// Parses a JSON document, rejecting unknown top-level keys and experiment names.
    pub fn from_json(text: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(text)?;
        let obj = value
            .as_object()
            .ok_or_else(|| Error::InvalidParameter {
                key: "<root>".into(),
                reason: "config must be a JSON object".into(),
            })?;
        if let Some(k) = obj.keys().find(|k| !TOP_LEVEL_KEYS.contains(&k.as_str())) {
            return Err(Error::UnknownKey(k.clone()));
        }
        let cfg: ExperimentConfig = serde_json::from_value(value.clone()).map_err(|e| Error::InvalidParameter {
            key: "<root>".into(),
            reason: e.to_string(),
        })?;
        check_experiment(&cfg.experiment)?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// Canonical form hashed into the digest: sorted keys, no output location.
    pub fn canonical_json(&self) -> String {
        let mut v = serde_json::json!({
            "experiment": self.experiment,
            "seed": self.seed,
            "params": Value::Object(self.params.clone()),
        });
        sort_value(&mut v);
        serde_json::to_string(&v).expect("JSON values always serialize")
    }

    /// Hex SHA-256 of [`canonical_json`](Self::canonical_json).
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.canonical_json().as_bytes()))
    }

    /// First 16 hex digits of the digest, used as the directory name.
    pub fn short_digest(&self) -> String {
        self.digest()[..16].to_string()
    }
}

fn sort_value(v: &mut Value) {
    match v {
        Value::Object(map) => {
            let mut entries: Vec<(String, Value)> = std::mem::take(map).into_iter().collect();
            entries.sort_by(|a, b| a.0.cmp(&b.0));
            for (k, mut val) in entries {
                sort_value(&mut val);
                map.insert(k, val);
            }
        }
        Value::Array(items) => items.iter_mut().for_each(sort_value),
        _ => {}
    }
}

/// Decodes an experiment's parameter map into `P`, filling defaults.
///
/// Keys absent from `P::default()` are rejected as unknown; a value that does
/// not decode is reported against its own key.
pub fn parse_params<P>(params: &Map<String, Value>) -> Result<P>
where
    P: Default + Serialize + DeserializeOwned,
{
    let defaults = match serde_json::to_value(P::default())? {
        Value::Object(m) => m,
        _ => unreachable!("parameter structs serialize to objects"),
    };
    for key in params.keys() {
        if !defaults.contains_key(key) {
            return Err(Error::UnknownKey(key.clone()));
        }
    }
    for (key, value) in params {
        let mut single = defaults.clone();
        single.insert(key.clone(), value.clone());
        if let Err(e) = serde_json::from_value::<P>(Value::Object(single)) {
            return Err(Error::InvalidParameter {
                key: key.clone(),
                reason: e.to_string(),
            });
        }
    }
    let mut merged = defaults;
    merged.extend(params.clone());
    serde_json::from_value(Value::Object(merged)).map_err(|e| Error::InvalidParameter {
        key: "<params>".into(),
        reason: e.to_string(),
    })
}

/// Serializes resolved parameters back into a map (defaults made explicit).
pub fn params_to_map<P: Serialize>(p: &P) -> Map<String, Value> {
    match serde_json::to_value(p).expect("parameter structs serialize") {
        Value::Object(m) => m,
        _ => unreachable!("parameter structs serialize to objects"),
    }
}
