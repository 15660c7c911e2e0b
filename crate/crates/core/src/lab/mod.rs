//! Experiment harness behind the `lab` binary: a registry of experiments with
//! typed parameter schemas, seeded per-trial execution on a bounded worker
//! pool, and CSV/JSON persistence.
//!
//! Trial `t` of a run draws from `RngStream::new(master_seed, t)`; randomness
//! shared by all trials of a run (a graph, a coupling matrix) comes from
//! stream [`INSTANCE_STREAM`]. Results therefore do not depend on `jobs`.

mod config;
mod emit;
mod registry;

use std::path::PathBuf;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{LabError, Result};

pub use config::{load_config_file, parse_config, ConfigFile};
pub use emit::{emit, read_json_records, write_csv, write_json};
pub use registry::{experiment, experiments, ExperimentSpec, ParamKind, ParamSpec};

/// Stream id reserved for randomness shared across the trials of one run.
pub const INSTANCE_STREAM: u64 = u64::MAX;

/// Process exit codes used by the binary.
pub mod exit {
    pub const SUCCESS: i32 = 0;
    pub const FAILURE: i32 = 1;
    pub const CONFIG: i32 = 2;
    pub const PARTIAL: i32 = 3;
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(LabError::Schema {
                key: "format".into(),
                message: format!("expected csv or json, got `{other}`"),
            }),
        }
    }
}

/// The reproducible part of a run: everything a record needs to be
/// regenerated.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSpec {
    pub experiment: String,
    pub master_seed: u64,
    pub trials: usize,
    /// Every schema parameter, defaults filled in.
    pub params: Map<String, Value>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub spec: RunSpec,
    pub jobs: usize,
    pub out: Option<PathBuf>,
    pub format: Format,
}

impl ExperimentConfig {
    /// Validates `overrides` against the experiment's schema and fills in
    /// defaults. Unknown keys and type mismatches name the offending key.
    pub fn new(
        experiment: &str,
        master_seed: u64,
        trials: usize,
        overrides: &Map<String, Value>,
    ) -> Result<Self> {
        let exp = registry::experiment(experiment)?;
        let params = exp.resolve(overrides)?;
        if trials == 0 {
            return Err(LabError::Schema {
                key: "trials".into(),
                message: "must be >= 1".into(),
            });
        }
        let cfg = Self {
            spec: RunSpec {
                experiment: exp.name.to_string(),
                master_seed,
                trials,
                params,
            },
            jobs: 1,
            out: None,
            format: Format::Csv,
        };
        (exp.validate)(&cfg.spec)?;
        Ok(cfg)
    }

    pub fn with_jobs(mut self, jobs: usize) -> Self {
        self.jobs = jobs.max(1);
        self
    }

    pub fn param(&self, key: &str) -> Option<&Value> {
        self.spec.params.get(key)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecordKind {
    /// One trial's results.
    Trial,
    /// One sample of a per-trial trace.
    Trace,
    /// An aggregate over all trials.
    Summary,
}

impl RecordKind {
    pub fn as_str(self) -> &'static str {
        match self {
            RecordKind::Trial => "trial",
            RecordKind::Trace => "trace",
            RecordKind::Summary => "summary",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub experiment: String,
    pub kind: RecordKind,
    pub trial: Option<usize>,
    pub stream_id: Option<u64>,
    pub config: RunSpec,
    pub results: Map<String, Value>,
    pub error: Option<String>,
    pub wall_time_s: f64,
}

impl TrialRecord {
    pub fn get(&self, key: &str) -> Option<&Value> {
        self.results.get(key)
    }

    pub fn get_f64(&self, key: &str) -> Option<f64> {
        self.results.get(key).and_then(Value::as_f64)
    }

    /// The record with `wall_time_s` zeroed, for comparisons.
    pub fn scientific(&self) -> TrialRecord {
        TrialRecord {
            wall_time_s: 0.0,
            ..self.clone()
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub records: Vec<TrialRecord>,
    /// Aggregate report for the console.
    pub summary: Value,
}

impl RunOutput {
    pub fn failures(&self) -> usize {
        self.records.iter().filter(|r| r.error.is_some()).count()
    }

    pub fn exit_code(&self) -> i32 {
        if self.failures() > 0 {
            exit::PARTIAL
        } else {
            exit::SUCCESS
        }
    }
}

/// Runs every trial of `cfg` on a pool of `cfg.jobs` workers. Failing trials
/// become records with `error` set; the sweep continues.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let exp = registry::experiment(&cfg.spec.experiment)?;
    (exp.validate)(&cfg.spec)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs.max(1))
        .build()
        .map_err(|e| LabError::InvalidArgument(format!("worker pool: {e}")))?;
    pool.install(|| (exp.run)(&cfg.spec))
}

/// Regenerates the records of trial `t` alone.
pub fn run_single_trial(spec: &RunSpec, t: usize) -> Result<Vec<TrialRecord>> {
    let exp = registry::experiment(&spec.experiment)?;
    (exp.validate)(spec)?;
    (exp.trial)(spec, t)
}

/// CSV column order for an experiment: fixed bookkeeping columns, then the
/// experiment's result columns.
pub fn csv_columns(experiment: &str) -> Result<Vec<String>> {
    let exp = registry::experiment(experiment)?;
    let mut cols: Vec<String> = ["kind", "trial", "stream_id", "seed"].iter().map(|s| s.to_string()).collect();
    cols.extend(exp.columns.iter().map(|s| s.to_string()));
    cols.extend(["error", "wall_time_s", "config"].iter().map(|s| s.to_string()));
    Ok(cols)
}

pub(crate) struct Recorder<'a> {
    spec: &'a RunSpec,
    start: Instant,
}

impl<'a> Recorder<'a> {
    pub(crate) fn new(spec: &'a RunSpec) -> Self {
        Self {
            spec,
            start: Instant::now(),
        }
    }

    pub(crate) fn record(
        &self,
        kind: RecordKind,
        trial: Option<usize>,
        stream_id: Option<u64>,
        results: Map<String, Value>,
        error: Option<String>,
    ) -> TrialRecord {
        TrialRecord {
            experiment: self.spec.experiment.clone(),
            kind,
            trial,
            stream_id,
            config: self.spec.clone(),
            results,
            error,
            wall_time_s: self.start.elapsed().as_secs_f64(),
        }
    }
}

/// Builds a JSON object from `(key, value)` pairs.
#[macro_export]
#[doc(hidden)]
macro_rules! fields {
    ($($k:expr => $v:expr),* $(,)?) => {{
        let mut m = serde_json::Map::new();
        $( m.insert($k.to_string(), serde_json::json!($v)); )*
        m
    }};
}
