use std::path::{Path, PathBuf};

use serde_json::{Map, Value};

use super::Format;
use crate::error::{LabError, Result};

/// Contents of a `--config` file. Top-level keys are the global settings;
/// experiment parameters live under `[params]`.
///
/// ```toml
/// experiment = "sk"
/// seed = 7
/// trials = 4
/// jobs = 2
/// format = "json"
/// out = "sk.json"
///
/// [params]
/// n = 8
/// beta = 0.1
/// ```
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConfigFile {
    pub experiment: Option<String>,
    pub seed: Option<u64>,
    pub trials: Option<usize>,
    pub jobs: Option<usize>,
    pub format: Option<Format>,
    pub out: Option<PathBuf>,
    pub params: Map<String, Value>,
}

fn schema(key: &str, message: impl Into<String>) -> LabError {
    LabError::Schema {
        key: key.to_string(),
        message: message.into(),
    }
}

fn to_json(key: &str, v: toml::Value) -> Result<Value> {
    Ok(match v {
        toml::Value::String(s) => Value::String(s),
        toml::Value::Integer(i) => Value::from(i),
        toml::Value::Float(f) => Value::from(f),
        toml::Value::Boolean(b) => Value::Bool(b),
        toml::Value::Array(a) => Value::Array(a.into_iter().map(|x| to_json(key, x)).collect::<Result<_>>()?),
        toml::Value::Datetime(_) | toml::Value::Table(_) => {
            return Err(schema(key, "unsupported value type"));
        }
    })
}

fn non_negative(key: &str, v: &toml::Value) -> Result<u64> {
    v.as_integer()
        .and_then(|i| u64::try_from(i).ok())
        .ok_or_else(|| schema(key, "expected a non-negative integer"))
}

pub fn parse_config(text: &str) -> Result<ConfigFile> {
    let table: toml::Table = text.parse().map_err(|e: toml::de::Error| LabError::Parse(e.to_string()))?;
    let mut cfg = ConfigFile::default();
    for (key, v) in table {
        match key.as_str() {
            "experiment" => {
                cfg.experiment = Some(v.as_str().ok_or_else(|| schema(&key, "expected a string"))?.to_string())
            }
            "seed" => cfg.seed = Some(non_negative(&key, &v)?),
            "trials" => cfg.trials = Some(non_negative(&key, &v)? as usize),
            "jobs" => cfg.jobs = Some(non_negative(&key, &v)? as usize),
            "format" => cfg.format = Some(v.as_str().ok_or_else(|| schema(&key, "expected a string"))?.parse()?),
            "out" => cfg.out = Some(PathBuf::from(v.as_str().ok_or_else(|| schema(&key, "expected a string"))?)),
            "params" => {
                let toml::Value::Table(t) = v else {
                    return Err(schema(&key, "expected a table"));
                };
                for (k, pv) in t {
                    let j = to_json(&k, pv)?;
                    cfg.params.insert(k, j);
                }
            }
            _ => return Err(schema(&key, "unknown key")),
        }
    }
    Ok(cfg)
}

pub fn load_config_file(path: &Path) -> Result<ConfigFile> {
    parse_config(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_file() {
        let c = parse_config(
            "experiment = \"sk\"\nseed = 7\ntrials = 3\nformat = \"json\"\n[params]\nn = 8\nbeta = 0.25\nmode = \"exact\"\ngrid = [0.0, 1.5]\n",
        )
        .unwrap();
        assert_eq!(c.experiment.as_deref(), Some("sk"));
        assert_eq!((c.seed, c.trials, c.format), (Some(7), Some(3), Some(Format::Json)));
        assert_eq!(c.params["n"], Value::from(8));
        assert_eq!(c.params["grid"], serde_json::json!([0.0, 1.5]));
    }

    #[test]
    fn unknown_top_level_key() {
        match parse_config("sed = 1\n") {
            Err(LabError::Schema { key, .. }) => assert_eq!(key, "sed"),
            other => panic!("{other:?}"),
        }
        assert!(parse_config("seed = -1\n").is_err());
        assert!(parse_config("format = \"xml\"\n").is_err());
    }
}
