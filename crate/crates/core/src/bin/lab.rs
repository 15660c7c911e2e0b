use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{Map, Value};

use conjecture_lab::lab::{self, exit, ExperimentConfig, Format};
use conjecture_lab::LabError;

#[derive(Parser)]
#[command(name = "lab", version, about = "Seeded experiment runner")]
struct Cli {
    /// Master seed; trial t uses stream t.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    trials: Option<usize>,
    /// Worker threads.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Output file for the records (stdout when absent).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_parser = ["csv", "json"])]
    format: Option<String>,
    /// TOML file with global settings and a [params] table.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Combinatorial and matrix discrepancy.
    Disc(DiscArgs),
    /// Kuramoto landscape sampling.
    Sync(SyncArgs),
    /// Random ellipsoid fitting scans.
    Ellipsoid(EllipsoidArgs),
    /// Kikuchi spectral threshold scans.
    Kikuchi(KikuchiArgs),
    /// Glauber dynamics for the SK measure.
    Sk(SkArgs),
    /// Multi-frequency spike detection.
    Multifreq(MultifreqArgs),
}

#[derive(Args, Serialize)]
struct DiscArgs {
    /// hadamard:K | random:N | random:RxC | group:SPEC | file:PATH
    #[arg(long)]
    matrix: Option<String>,
    /// exact | heuristic
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    budget: Option<u64>,
    #[arg(long)]
    restarts: Option<u64>,
}

#[derive(Args, Serialize)]
struct SyncArgs {
    /// er:N,P | reg:N,D | signed:N,DELTA | complete:N | cycle:N | file:PATH
    #[arg(long)]
    graph: Option<String>,
    #[arg(long)]
    tol_grad: Option<f64>,
    #[arg(long)]
    tol_hess: Option<f64>,
    #[arg(long)]
    max_iter: Option<u64>,
    #[arg(long)]
    initial_step: Option<f64>,
}

#[derive(Args, Serialize)]
struct EllipsoidArgs {
    #[arg(long)]
    d: Option<u64>,
    /// Comma-separated values of n / d^2.
    #[arg(long)]
    alpha_grid: Option<String>,
    /// EPS,M for the relaxed check.
    #[arg(long)]
    efp: Option<String>,
    #[arg(long)]
    tol_eq: Option<f64>,
    #[arg(long)]
    tol_psd: Option<f64>,
    #[arg(long)]
    max_iter: Option<u64>,
}

#[derive(Args, Serialize)]
struct KikuchiArgs {
    #[arg(long)]
    n: Option<u64>,
    #[arg(long)]
    r: Option<u64>,
    #[arg(long)]
    ell: Option<u64>,
    /// Comma-separated, starting at 0.
    #[arg(long)]
    lambda_grid: Option<String>,
    #[arg(long)]
    pop_epsilon: Option<f64>,
}

#[derive(Args, Serialize)]
struct SkArgs {
    #[arg(long)]
    n: Option<u64>,
    #[arg(long)]
    beta: Option<f64>,
    /// const:C | file:PATH
    #[arg(long)]
    h: Option<String>,
    /// exact | chain
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    steps: Option<u64>,
    #[arg(long)]
    thin: Option<u64>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    couple: Option<bool>,
    #[arg(long)]
    t_max: Option<u64>,
    #[arg(long)]
    delta: Option<f64>,
}

#[derive(Args, Serialize)]
struct MultifreqArgs {
    #[arg(long)]
    n: Option<u64>,
    #[arg(long = "L")]
    #[serde(rename = "L")]
    l: Option<u64>,
    #[arg(long)]
    lambda: Option<f64>,
    /// zL | u1
    #[arg(long)]
    group: Option<String>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    include_degenerate: Option<bool>,
    /// max | excess-sum
    #[arg(long)]
    variant: Option<String>,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Disc(_) => "disc",
            Command::Sync(_) => "sync",
            Command::Ellipsoid(_) => "ellipsoid",
            Command::Kikuchi(_) => "kikuchi",
            Command::Sk(_) => "sk",
            Command::Multifreq(_) => "multifreq",
        }
    }

    fn overrides(&self) -> Map<String, Value> {
        let v = match self {
            Command::Disc(a) => serde_json::to_value(a),
            Command::Sync(a) => serde_json::to_value(a),
            Command::Ellipsoid(a) => serde_json::to_value(a),
            Command::Kikuchi(a) => serde_json::to_value(a),
            Command::Sk(a) => serde_json::to_value(a),
            Command::Multifreq(a) => serde_json::to_value(a),
        };
        match v {
            Ok(Value::Object(m)) => m.into_iter().filter(|(_, v)| !v.is_null()).collect(),
            _ => Map::new(),
        }
    }
}

fn is_config_error(e: &LabError) -> bool {
    matches!(
        e,
        LabError::Schema { .. }
            | LabError::UnknownExperiment(_)
            | LabError::Parse(_)
            | LabError::InvalidArgument(_)
            | LabError::UnsupportedGroup(_)
    )
}

fn format_for(explicit: Option<Format>, out: Option<&Path>) -> Format {
    explicit.unwrap_or_else(|| match out.and_then(|p| p.extension()).and_then(|e| e.to_str()) {
        Some("json") => Format::Json,
        _ => Format::Csv,
    })
}

fn build_config(cli: &Cli) -> Result<ExperimentConfig, LabError> {
    let name = cli.command.name();
    let file = match &cli.config {
        Some(p) => lab::load_config_file(p)?,
        None => Default::default(),
    };
    if let Some(e) = &file.experiment {
        if e != name {
            return Err(LabError::Schema {
                key: "experiment".into(),
                message: format!("config is for `{e}` but the subcommand is `{name}`"),
            });
        }
    }
    let mut params = file.params.clone();
    params.extend(cli.command.overrides());
    let spec = lab::experiment(name)?;
    let trials = cli.trials.or(file.trials).unwrap_or(spec.default_trials);
    let seed = cli.seed.or(file.seed).unwrap_or(0);
    let mut cfg = ExperimentConfig::new(name, seed, trials, &params)?.with_jobs(cli.jobs.or(file.jobs).unwrap_or(1));
    cfg.out = cli.out.clone().or(file.out);
    let explicit = match &cli.format {
        Some(f) => Some(f.parse()?),
        None => file.format,
    };
    cfg.format = format_for(explicit, cfg.out.as_deref());
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match build_config(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("lab: {e}");
            return ExitCode::from(exit::CONFIG as u8);
        }
    };
    let output = match lab::run_experiment(&cfg) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("lab: {e}");
            let code = if is_config_error(&e) { exit::CONFIG } else { exit::FAILURE };
            return ExitCode::from(code as u8);
        }
    };
    if let Err(e) = lab::emit(&cfg.spec.experiment, &output.records, cfg.format, cfg.out.as_deref()) {
        eprintln!("lab: writing output: {e}");
        return ExitCode::from(exit::FAILURE as u8);
    }
    let summary = serde_json::to_string_pretty(&output.summary).unwrap_or_default();
    if cfg.out.is_some() {
        println!("{summary}");
    } else {
        eprintln!("{summary}");
    }
    let failures = output.failures();
    if failures > 0 {
        eprintln!("lab: {failures} trial(s) failed; see the error column");
    }
    ExitCode::from(output.exit_code() as u8)
}
