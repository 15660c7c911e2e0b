use std::path::PathBuf;

use rayon::prelude::*;
use serde_json::{json, Map, Value};

use super::{RecordKind, Recorder, RunOutput, RunSpec, TrialRecord, INSTANCE_STREAM};
use crate::discrepancy::{
    disc_exact, disc_heuristic, matrix_spencer_min_norm, regular_representation, sylvester_hadamard, GroupSpec,
    IntMatrix, SignMatrix,
};
use crate::ellipsoid::{points_for_alpha, scan_point, EfpParams, SolverParams, Verdict};
use crate::error::{LabError, Result};
use crate::fields;
use crate::kikuchi::{scan_trial, summarize_scan, validate_grid};
use crate::kuramoto::{
    summarize_sync, sync_trial, CriticalityReport, Graph, GraphSpec, StepPolicy, SyncParams, SyncTrial,
};
use crate::multifreq::{detection_trial, summarize_detection, validate_detection, DetectionParams};
use crate::rng::RngStream;
use crate::sk::{
    condition_report, exact_kernel, run_chain, sk_instance, SkInstance, SpinState, ANARI_RATIO_BAND, MAX_EXACT_N,
    MAX_TMIX_N,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParamKind {
    Int,
    Float,
    Str,
    Bool,
    /// Array of numbers; a comma-separated string is also accepted.
    FloatList,
}

#[derive(Clone, Copy, Debug)]
pub struct ParamSpec {
    pub name: &'static str,
    pub kind: ParamKind,
    /// Default as a JSON literal.
    pub default: &'static str,
    pub help: &'static str,
}

const fn p(name: &'static str, kind: ParamKind, default: &'static str, help: &'static str) -> ParamSpec {
    ParamSpec {
        name,
        kind,
        default,
        help,
    }
}

type RunFn = fn(&RunSpec) -> Result<RunOutput>;
type TrialFn = fn(&RunSpec, usize) -> Result<Vec<TrialRecord>>;
type ValidateFn = fn(&RunSpec) -> Result<()>;

pub struct ExperimentSpec {
    pub name: &'static str,
    pub about: &'static str,
    pub params: &'static [ParamSpec],
    pub default_trials: usize,
    /// Result columns, in CSV order.
    pub columns: &'static [&'static str],
    pub validate: ValidateFn,
    pub run: RunFn,
    pub trial: TrialFn,
}

fn schema(key: &str, message: impl Into<String>) -> LabError {
    LabError::Schema {
        key: key.to_string(),
        message: message.into(),
    }
}

fn coerce(spec: &ParamSpec, v: &Value) -> Result<Value> {
    let bad = |what: &str| schema(spec.name, format!("expected {what}, got {v}"));
    match spec.kind {
        ParamKind::Int => v.as_u64().map(Value::from).ok_or_else(|| bad("a non-negative integer")),
        ParamKind::Float => v.as_f64().map(|f| json!(f)).ok_or_else(|| bad("a number")),
        ParamKind::Str => v.as_str().map(Value::from).ok_or_else(|| bad("a string")),
        ParamKind::Bool => v.as_bool().map(Value::Bool).ok_or_else(|| bad("a boolean")),
        ParamKind::FloatList => {
            let items: Vec<f64> = match v {
                Value::Array(a) => a.iter().map(|x| x.as_f64().ok_or_else(|| bad("a list of numbers"))).collect::<Result<_>>()?,
                Value::String(s) if s.trim().is_empty() => Vec::new(),
                Value::String(s) => s
                    .split(',')
                    .map(|t| t.trim().parse::<f64>().map_err(|_| bad("a comma-separated list of numbers")))
                    .collect::<Result<_>>()?,
                _ => return Err(bad("a list of numbers")),
            };
            Ok(json!(items))
        }
    }
}

impl ExperimentSpec {
    /// Schema defaults overlaid with `overrides`.
    pub fn resolve(&self, overrides: &Map<String, Value>) -> Result<Map<String, Value>> {
        for key in overrides.keys() {
            if !self.params.iter().any(|p| p.name == key) {
                return Err(schema(key, format!("unknown parameter for `{}`", self.name)));
            }
        }
        let mut out = Map::new();
        for spec in self.params {
            let raw = match overrides.get(spec.name) {
                Some(v) => v.clone(),
                None => serde_json::from_str(spec.default).expect("valid default literal"),
            };
            out.insert(spec.name.to_string(), coerce(spec, &raw)?);
        }
        Ok(out)
    }
}

/// Typed access to resolved parameters.
struct P<'a>(&'a RunSpec);

impl P<'_> {
    fn get(&self, k: &str) -> Result<&Value> {
        self.0.params.get(k).ok_or_else(|| schema(k, "missing"))
    }

    fn usize(&self, k: &str) -> Result<usize> {
        self.get(k)?.as_u64().map(|v| v as usize).ok_or_else(|| schema(k, "expected an integer"))
    }

    fn f64(&self, k: &str) -> Result<f64> {
        self.get(k)?.as_f64().ok_or_else(|| schema(k, "expected a number"))
    }

    fn str(&self, k: &str) -> Result<&str> {
        self.get(k)?.as_str().ok_or_else(|| schema(k, "expected a string"))
    }

    fn bool(&self, k: &str) -> Result<bool> {
        self.get(k)?.as_bool().ok_or_else(|| schema(k, "expected a boolean"))
    }

    fn list(&self, k: &str) -> Result<Vec<f64>> {
        self.get(k)?
            .as_array()
            .and_then(|a| a.iter().map(Value::as_f64).collect())
            .ok_or_else(|| schema(k, "expected a list of numbers"))
    }
}

fn trial_stream(spec: &RunSpec, stream: u64) -> RngStream {
    RngStream::new(spec.master_seed, stream)
}

fn failed(rec: &Recorder, trial: usize, stream: u64, e: &LabError) -> Vec<TrialRecord> {
    vec![rec.record(RecordKind::Trial, Some(trial), Some(stream), Map::new(), Some(e.to_string()))]
}

fn sweep<F>(units: usize, f: F) -> Vec<TrialRecord>
where
    F: Fn(usize) -> Vec<TrialRecord> + Sync + Send,
{
    let per: Vec<Vec<TrialRecord>> = (0..units).into_par_iter().map(f).collect();
    per.into_iter().flatten().collect()
}

fn check_trial(t: usize, units: usize) -> Result<()> {
    if t >= units {
        return Err(LabError::InvalidArgument(format!("trial {t} out of range (run has {units})")));
    }
    Ok(())
}

static EXPERIMENTS: &[ExperimentSpec] = &[
    ExperimentSpec {
        name: "disc",
        about: "discrepancy of an integer matrix, or the matrix Spencer value of a group's regular representation",
        params: &[
            p("matrix", ParamKind::Str, "\"hadamard:2\"", "hadamard:K | random:N | random:RxC | group:SPEC | file:PATH"),
            p("mode", ParamKind::Str, "\"exact\"", "exact | heuristic"),
            p("budget", ParamKind::Int, "1000000000", "node budget for exact search"),
            p("restarts", ParamKind::Int, "64", "local-search restarts in heuristic mode"),
        ],
        default_trials: 1,
        columns: &["rows", "cols", "value", "exact", "nodes_explored", "value_over_sqrt_n", "coloring"],
        validate: disc::validate,
        run: disc::run,
        trial: disc::trial,
    },
    ExperimentSpec {
        name: "sync",
        about: "gradient descent from random phases and certification of the endpoints",
        params: &[
            p("graph", ParamKind::Str, "\"complete:5\"", "er:N,P | reg:N,D | signed:N,DELTA | complete:N | cycle:N | file:PATH"),
            p("tol_grad", ParamKind::Float, "1e-8", "gradient infinity-norm tolerance"),
            p("tol_hess", ParamKind::Float, "1e-6", "quotient Hessian eigenvalue tolerance"),
            p("max_iter", ParamKind::Int, "200000", "descent iteration cap"),
            p("initial_step", ParamKind::Float, "0.1", "first trial step of each line search"),
        ],
        default_trials: 100,
        columns: &[
            "energy",
            "grad_inf_norm",
            "quotient_min_eig",
            "order_parameter",
            "classification",
            "degenerate",
            "iterations",
            "fraction_synchronized",
            "n_synchronized",
            "n_nonglobal",
            "n_saddle",
            "n_nonconverged",
            "best_energy",
        ],
        validate: sync::validate,
        run: sync::run,
        trial: sync::trial,
    },
    ExperimentSpec {
        name: "ellipsoid",
        about: "feasibility of fitting a centered ellipsoid through random Gaussian points",
        params: &[
            p("d", ParamKind::Int, "20", "ambient dimension"),
            p("alpha_grid", ParamKind::FloatList, "[0.1, 0.25, 0.45]", "values of n / d^2"),
            p("efp", ParamKind::FloatList, "[]", "empty, or EPS,M for the relaxed check"),
            p("tol_eq", ParamKind::Float, "1e-7", "constraint residual tolerance"),
            p("tol_psd", ParamKind::Float, "1e-9", "eigenvalue tolerance"),
            p("max_iter", ParamKind::Int, "50000", "alternating projection cap"),
        ],
        default_trials: 10,
        columns: &[
            "alpha",
            "n",
            "verdict",
            "iterations",
            "min_eig",
            "max_residual",
            "efp",
            "feasible_rate",
            "mean_iterations",
        ],
        validate: ellipsoid::validate,
        run: ellipsoid::run,
        trial: ellipsoid::trial,
    },
    ExperimentSpec {
        name: "kikuchi",
        about: "top eigenvalue of the Kikuchi matrix across signal strengths, with a pop-out estimate",
        params: &[
            p("n", ParamKind::Int, "60", "tensor dimension"),
            p("r", ParamKind::Int, "2", "tensor order (even)"),
            p("ell", ParamKind::Int, "1", "subset size"),
            p("lambda_grid", ParamKind::FloatList, "[0, 0.5, 1, 1.5, 2, 3, 4]", "signal strengths, starting at 0"),
            p("pop_epsilon", ParamKind::Float, "0.05", "relative margin for pop-out"),
        ],
        default_trials: 5,
        columns: &[
            "lambda",
            "lmax",
            "trial_unconverged",
            "mean_lmax",
            "std_lmax",
            "p_value",
            "pop_flag",
            "lambda_natural",
            "uncertainty",
            "normalized",
            "unconverged",
        ],
        validate: kikuchi::validate,
        run: kikuchi::run,
        trial: kikuchi::trial,
    },
    ExperimentSpec {
        name: "sk",
        about: "Glauber dynamics for the SK measure: exact kernel analysis or simulated chains",
        params: &[
            p("n", ParamKind::Int, "8", "number of spins"),
            p("beta", ParamKind::Float, "0.1", "inverse temperature"),
            p("h", ParamKind::Str, "\"const:0\"", "const:C | file:PATH"),
            p("mode", ParamKind::Str, "\"exact\"", "exact | chain"),
            p("steps", ParamKind::Int, "10000", "chain length in single-site updates"),
            p("thin", ParamKind::Int, "0", "trace stride; 0 picks about 1000 samples"),
            p("couple", ParamKind::Bool, "false", "run a grand-coupled chain from the flipped start"),
            p("t_max", ParamKind::Int, "1000000", "cap for exact mixing times"),
            p("delta", ParamKind::Float, "0.01", "margin for the spectral width condition"),
        ],
        default_trials: 1,
        columns: &[
            "gap",
            "lambda_2",
            "lambda_min",
            "t_mix_0.25",
            "t_mix_0.1",
            "t_mix_0.01",
            "row_sum_error",
            "detailed_balance_error",
            "stationarity_error",
            "max_row_abs_sum",
            "width",
            "dobrushin",
            "spectral_width",
            "anari",
            "step",
            "energy",
            "magnetization",
            "tau_energy",
            "tau_magnetization",
            "flip_rate",
            "coalescence_step",
        ],
        validate: sk::validate,
        run: sk::run,
        trial: sk::trial,
    },
    ExperimentSpec {
        name: "multifreq",
        about: "spectral detection of a multi-frequency spike against paired null instances",
        params: &[
            p("n", ParamKind::Int, "200", "dimension"),
            p("L", ParamKind::Int, "1", "number of frequencies"),
            p("lambda", ParamKind::Float, "1.5", "signal strength"),
            p("group", ParamKind::Str, "\"u1\"", "zL | u1"),
            p("include_degenerate", ParamKind::Bool, "false", "keep frequencies with a deterministic signal"),
            p("variant", ParamKind::Str, "\"max\"", "max | excess-sum"),
        ],
        default_trials: 50,
        columns: &["freq", "label", "stat", "auc", "auc_max", "auc_excess_sum", "power", "threshold"],
        validate: multifreq::validate,
        run: multifreq::run,
        trial: multifreq::trial,
    },
];

pub fn experiments() -> &'static [ExperimentSpec] {
    EXPERIMENTS
}

pub fn experiment(name: &str) -> Result<&'static ExperimentSpec> {
    EXPERIMENTS
        .iter()
        .find(|e| e.name == name)
        .ok_or_else(|| LabError::UnknownExperiment(name.to_string()))
}

mod disc {
    use super::*;

    pub(super) enum Source {
        Hadamard(u32),
        Random(usize, usize),
        Group(GroupSpec),
        File(PathBuf),
    }

    pub(super) fn parse_source(s: &str) -> Result<Source> {
        let bad = |m: &str| schema("matrix", format!("{m}: `{s}`"));
        let (head, rest) = s.split_once(':').unwrap_or(("file", s));
        match head {
            "hadamard" => Ok(Source::Hadamard(rest.parse().map_err(|_| bad("bad order"))?)),
            "random" => {
                let (r, c) = rest.split_once('x').unwrap_or((rest, rest));
                Ok(Source::Random(
                    r.parse().map_err(|_| bad("bad size"))?,
                    c.parse().map_err(|_| bad("bad size"))?,
                ))
            }
            "group" => Ok(Source::Group(rest.parse().map_err(|_| bad("bad group"))?)),
            "file" => Ok(Source::File(PathBuf::from(rest))),
            _ => Err(bad("unknown matrix source")),
        }
    }

    pub(super) fn validate(spec: &RunSpec) -> Result<()> {
        let p = P(spec);
        match p.str("mode")? {
            "exact" | "heuristic" => {}
            other => return Err(schema("mode", format!("expected exact or heuristic, got `{other}`"))),
        }
        match parse_source(p.str("matrix")?)? {
            Source::File(path) if !path.exists() => Err(schema("matrix", format!("no such file {}", path.display()))),
            Source::Random(r, c) if r == 0 || c == 0 => Err(schema("matrix", "empty matrix")),
            _ => Ok(()),
        }
    }

    fn one(spec: &RunSpec, t: usize) -> Result<Map<String, Value>> {
        let p = P(spec);
        let mut rng = trial_stream(spec, t as u64);
        let budget = p.usize("budget")? as u64;
        let a: IntMatrix = match parse_source(p.str("matrix")?)? {
            Source::Group(g) => {
                let rep = regular_representation(&g)?;
                let res = matrix_spencer_min_norm(&rep.to_spencer_instance()?, budget)?;
                let order = g.order();
                return Ok(fields! {
                    "rows" => order,
                    "cols" => order,
                    "value" => res.value,
                    "exact" => res.exact,
                    "nodes_explored" => res.evaluated,
                    "value_over_sqrt_n" => res.constant,
                    "coloring" => signs(&res.signs),
                });
            }
            Source::Hadamard(k) => (&sylvester_hadamard(k)?).into(),
            Source::Random(r, c) => (&SignMatrix::random(r, c, &mut rng)).into(),
            Source::File(path) => IntMatrix::read(&path)?,
        };
        let cert = match p.str("mode")? {
            "exact" => disc_exact(&a, budget),
            _ => disc_heuristic(&a, p.usize("restarts")?.max(1), &mut rng),
        };
        Ok(fields! {
            "rows" => a.rows(),
            "cols" => a.cols(),
            "value" => cert.value,
            "exact" => cert.exact,
            "nodes_explored" => cert.nodes_explored,
            "value_over_sqrt_n" => cert.value as f64 / (a.cols() as f64).sqrt(),
            "coloring" => signs(&cert.x),
        })
    }

    fn signs(x: &[i8]) -> String {
        x.iter().map(|&v| if v > 0 { '+' } else { '-' }).collect()
    }

    pub(super) fn trial(spec: &RunSpec, t: usize) -> Result<Vec<TrialRecord>> {
        check_trial(t, spec.trials)?;
        Ok(record(&Recorder::new(spec), spec, t))
    }

    fn record(rec: &Recorder, spec: &RunSpec, t: usize) -> Vec<TrialRecord> {
        match one(spec, t) {
            Ok(m) => vec![rec.record(RecordKind::Trial, Some(t), Some(t as u64), m, None)],
            Err(e) => failed(rec, t, t as u64, &e),
        }
    }

    pub(super) fn run(spec: &RunSpec) -> Result<RunOutput> {
        let rec = Recorder::new(spec);
        let records = sweep(spec.trials, |t| record(&rec, spec, t));
        let values: Vec<f64> = records.iter().filter_map(|r| r.get_f64("value")).collect();
        let summary = json!({
            "experiment": "disc",
            "trials": spec.trials,
            "max_value": values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            "min_value": values.iter().copied().fold(f64::INFINITY, f64::min),
            "all_exact": records.iter().all(|r| r.get("exact") == Some(&Value::Bool(true))),
        });
        Ok(RunOutput { records, summary })
    }
}

mod sync {
    use super::*;

    fn graph(spec: &RunSpec) -> Result<Graph> {
        let gs: GraphSpec = P(spec).str("graph")?.parse().map_err(|e: LabError| schema("graph", e.to_string()))?;
        gs.build(&mut trial_stream(spec, INSTANCE_STREAM))
    }

    fn params(spec: &RunSpec) -> Result<SyncParams> {
        let p = P(spec);
        Ok(SyncParams {
            policy: StepPolicy {
                initial_step: p.f64("initial_step")?,
                ..StepPolicy::default()
            },
            tol_grad: p.f64("tol_grad")?,
            tol_hess: p.f64("tol_hess")?,
            max_iter: p.usize("max_iter")?,
        })
    }

    pub(super) fn validate(spec: &RunSpec) -> Result<()> {
        let _: GraphSpec = P(spec).str("graph")?.parse().map_err(|e: LabError| schema("graph", e.to_string()))?;
        let sp = params(spec)?;
        if !(sp.tol_grad > 0.0 && sp.tol_hess > 0.0 && sp.policy.initial_step > 0.0) {
            return Err(schema("tol_grad", "tolerances and step must be positive"));
        }
        Ok(())
    }

    type Outcome = Result<(SyncTrial, CriticalityReport)>;

    fn records(rec: &Recorder, t: usize, res: &Outcome) -> Vec<TrialRecord> {
        match res {
            Ok((row, rep)) => {
                let m = fields! {
                    "energy" => row.energy,
                    "grad_inf_norm" => row.grad_inf_norm,
                    "quotient_min_eig" => row.quotient_min_eig,
                    "order_parameter" => rep.order_parameter,
                    "classification" => row.classification.as_str(),
                    "degenerate" => row.degenerate,
                    "iterations" => row.iterations,
                };
                vec![rec.record(RecordKind::Trial, Some(t), Some(t as u64), m, None)]
            }
            Err(e) => failed(rec, t, t as u64, e),
        }
    }

    pub(super) fn trial(spec: &RunSpec, t: usize) -> Result<Vec<TrialRecord>> {
        check_trial(t, spec.trials)?;
        let g = graph(spec)?;
        let res = sync_trial(&g, spec.master_seed, t, &params(spec)?);
        Ok(records(&Recorder::new(spec), t, &res))
    }

    pub(super) fn run(spec: &RunSpec) -> Result<RunOutput> {
        let rec = Recorder::new(spec);
        let g = graph(spec)?;
        let sp = params(spec)?;
        let results: Vec<Outcome> = (0..spec.trials)
            .into_par_iter()
            .map(|t| sync_trial(&g, spec.master_seed, t, &sp))
            .collect();
        let mut out: Vec<TrialRecord> = results.iter().enumerate().flat_map(|(t, r)| records(&rec, t, r)).collect();
        let report = summarize_sync(results.into_iter().filter_map(|r| r.ok()).collect());
        let m = fields! {
            "fraction_synchronized" => report.fraction_synchronized,
            "n_synchronized" => report.n_synchronized,
            "n_nonglobal" => report.n_nonglobal,
            "n_saddle" => report.n_saddle,
            "n_nonconverged" => report.n_nonconverged,
            "best_energy" => report.best_energy,
        };
        out.push(rec.record(RecordKind::Summary, None, None, m, None));
        let summary = json!({
            "experiment": "sync",
            "graph": P(spec).str("graph")?,
            "n": g.n(),
            "edges": g.edge_count(),
            "trials": spec.trials,
            "fraction_synchronized": report.fraction_synchronized,
            "n_synchronized": report.n_synchronized,
            "n_nonglobal": report.n_nonglobal,
            "n_saddle": report.n_saddle,
            "n_nonconverged": report.n_nonconverged,
            "best_energy": report.best_energy,
            "best_energy_synchronized": report.best_energy_synchronized,
            "worst_nonglobal": report.worst_nonglobal,
            "note": report.note,
        });
        Ok(RunOutput { records: out, summary })
    }
}

mod ellipsoid {
    use super::*;

    fn solver(spec: &RunSpec) -> Result<(usize, Vec<f64>, SolverParams, Option<EfpParams>)> {
        let p = P(spec);
        let efp = match p.list("efp")?.as_slice() {
            [] => None,
            [eps, m] => Some(EfpParams::new(*eps, *m).map_err(|e| schema("efp", e.to_string()))?),
            _ => return Err(schema("efp", "expected EPS,M")),
        };
        Ok((
            p.usize("d")?,
            p.list("alpha_grid")?,
            SolverParams {
                tol_eq: p.f64("tol_eq")?,
                tol_psd: p.f64("tol_psd")?,
                max_iter: p.usize("max_iter")?,
            },
            efp,
        ))
    }

    pub(super) fn validate(spec: &RunSpec) -> Result<()> {
        let (d, grid, _, _) = solver(spec)?;
        if d < 2 {
            return Err(schema("d", "must be >= 2"));
        }
        if grid.is_empty() || grid.iter().any(|a| !(*a > 0.0 && a.is_finite())) {
            return Err(schema("alpha_grid", "must be non-empty and positive"));
        }
        Ok(())
    }

    fn record(rec: &Recorder, spec: &RunSpec, unit: usize) -> Result<Vec<TrialRecord>> {
        let (d, grid, params, efp) = solver(spec)?;
        let (a, t) = (unit / spec.trials, unit % spec.trials);
        let st = scan_point(d, grid[a], t, unit as u64, spec.master_seed, &params, efp.as_ref());
        let m = fields! {
            "alpha" => st.alpha,
            "n" => st.n,
            "verdict" => st.verdict.as_str(),
            "iterations" => st.iterations,
            "min_eig" => st.min_eig,
            "max_residual" => st.max_residual,
            "efp" => st.efp,
        };
        Ok(vec![rec.record(RecordKind::Trial, Some(t), Some(st.stream_id), m, st.error)])
    }

    /// Trial `t` at every grid point, in grid order.
    pub(super) fn trial(spec: &RunSpec, t: usize) -> Result<Vec<TrialRecord>> {
        let (_, grid, _, _) = solver(spec)?;
        check_trial(t, spec.trials)?;
        let rec = Recorder::new(spec);
        let mut out = Vec::new();
        for a in 0..grid.len() {
            out.extend(record(&rec, spec, a * spec.trials + t)?);
        }
        Ok(out)
    }

    pub(super) fn run(spec: &RunSpec) -> Result<RunOutput> {
        let rec = Recorder::new(spec);
        let (d, grid, _, _) = solver(spec)?;
        let mut records = sweep(grid.len() * spec.trials, |u| {
            record(&rec, spec, u).unwrap_or_else(|e| failed(&rec, u % spec.trials, u as u64, &e))
        });
        let mut rows = Vec::new();
        for (a, &alpha) in grid.iter().enumerate() {
            let chunk = &records[a * spec.trials..(a + 1) * spec.trials];
            let feasible = chunk
                .iter()
                .filter(|r| r.get("verdict").and_then(Value::as_str) == Some(Verdict::Feasible.as_str()))
                .count();
            let mean_iter = chunk.iter().filter_map(|r| r.get_f64("iterations")).sum::<f64>() / spec.trials as f64;
            let rate = feasible as f64 / spec.trials as f64;
            rows.push(json!({"alpha": alpha, "n": points_for_alpha(d, alpha), "feasible_rate": rate, "mean_iterations": mean_iter}));
            let m = fields! {
                "alpha" => alpha,
                "n" => points_for_alpha(d, alpha),
                "feasible_rate" => rate,
                "mean_iterations" => mean_iter,
            };
            records.push(rec.record(RecordKind::Summary, None, None, m, None));
        }
        let summary = json!({"experiment": "ellipsoid", "d": d, "trials": spec.trials, "rows": rows});
        Ok(RunOutput { records, summary })
    }
}

mod kikuchi {
    use super::*;

    fn dims(spec: &RunSpec) -> Result<(usize, usize, usize, Vec<f64>, f64)> {
        let p = P(spec);
        Ok((p.usize("n")?, p.usize("r")?, p.usize("ell")?, p.list("lambda_grid")?, p.f64("pop_epsilon")?))
    }

    pub(super) fn validate(spec: &RunSpec) -> Result<()> {
        let (n, r, ell, grid, eps) = dims(spec)?;
        validate_grid(&grid).map_err(|e| schema("lambda_grid", e.to_string()))?;
        if r < 2 || r % 2 == 1 {
            return Err(schema("r", "must be even and >= 2"));
        }
        if ell < r / 2 || ell > n {
            return Err(schema("ell", "must satisfy r/2 <= ell <= n"));
        }
        if !(eps >= 0.0) {
            return Err(schema("pop_epsilon", "must be >= 0"));
        }
        Ok(())
    }

    fn one(spec: &RunSpec, t: usize) -> Result<(Vec<f64>, usize)> {
        let (n, r, ell, grid, _) = dims(spec)?;
        scan_trial(n, r, ell, &grid, &mut trial_stream(spec, t as u64))
    }

    fn records(rec: &Recorder, grid: &[f64], t: usize, res: &Result<(Vec<f64>, usize)>) -> Vec<TrialRecord> {
        match res {
            Ok((lmax, flagged)) => grid
                .iter()
                .zip(lmax)
                .map(|(&lambda, &l)| {
                    let m = fields! {"lambda" => lambda, "lmax" => l, "trial_unconverged" => flagged};
                    rec.record(RecordKind::Trial, Some(t), Some(t as u64), m, None)
                })
                .collect(),
            Err(e) => failed(rec, t, t as u64, e),
        }
    }

    pub(super) fn trial(spec: &RunSpec, t: usize) -> Result<Vec<TrialRecord>> {
        check_trial(t, spec.trials)?;
        let (_, _, _, grid, _) = dims(spec)?;
        Ok(records(&Recorder::new(spec), &grid, t, &one(spec, t)))
    }

    pub(super) fn run(spec: &RunSpec) -> Result<RunOutput> {
        let rec = Recorder::new(spec);
        let (n, r, ell, grid, eps) = dims(spec)?;
        let results: Vec<Result<(Vec<f64>, usize)>> = (0..spec.trials).into_par_iter().map(|t| one(spec, t)).collect();
        let mut out: Vec<TrialRecord> = results
            .iter()
            .enumerate()
            .flat_map(|(t, res)| records(&rec, &grid, t, res))
            .collect();
        let ok: Vec<&(Vec<f64>, usize)> = results.iter().filter_map(|r| r.as_ref().ok()).collect();
        if ok.is_empty() {
            let summary = json!({"experiment": "kikuchi", "error": "every trial failed"});
            return Ok(RunOutput { records: out, summary });
        }
        let unconverged = ok.iter().map(|o| o.1).sum();
        let report = summarize_scan(n, r, ell, &grid, ok.iter().map(|o| o.0.clone()).collect(), eps, unconverged);
        for row in &report.rows {
            let m = fields! {
                "lambda" => row.lambda,
                "mean_lmax" => row.mean_lmax,
                "std_lmax" => row.std_lmax,
                "p_value" => row.p_value,
                "pop_flag" => row.pop_flag,
            };
            out.push(rec.record(RecordKind::Summary, None, None, m, None));
        }
        let m = fields! {
            "lambda_natural" => report.lambda_natural,
            "uncertainty" => report.uncertainty,
            "normalized" => report.normalized,
            "unconverged" => report.unconverged,
        };
        out.push(rec.record(RecordKind::Summary, None, None, m, None));
        let summary = json!({
            "experiment": "kikuchi",
            "n": n, "r": r, "ell": ell,
            "trials": report.trials,
            "pop_epsilon": eps,
            "rows": report.rows,
            "lambda_natural": report.lambda_natural,
            "uncertainty": report.uncertainty,
            "normalized": report.normalized,
            "unconverged": report.unconverged,
        });
        Ok(RunOutput { records: out, summary })
    }
}

mod sk {
    use super::*;

    const EPS: [f64; 3] = [0.25, 0.1, 0.01];

    fn field(spec: &RunSpec, n: usize) -> Result<Vec<f64>> {
        let p = P(spec);
        let s = p.str("h")?;
        let bad = |m: String| schema("h", m);
        if let Some(c) = s.strip_prefix("const:") {
            let c: f64 = c.trim().parse().map_err(|_| bad(format!("bad constant `{c}`")))?;
            return Ok(vec![c; n]);
        }
        if let Some(path) = s.strip_prefix("file:") {
            let text = std::fs::read_to_string(path).map_err(|e| bad(format!("{path}: {e}")))?;
            let h: Vec<f64> = text
                .split_whitespace()
                .map(|t| t.parse().map_err(|_| bad(format!("bad value `{t}` in {path}"))))
                .collect::<Result<_>>()?;
            if h.len() != n {
                return Err(bad(format!("{path} holds {} values, expected {n}", h.len())));
            }
            return Ok(h);
        }
        Err(bad(format!("expected const:C or file:PATH, got `{s}`")))
    }

    pub(super) fn validate(spec: &RunSpec) -> Result<()> {
        let p = P(spec);
        let n = p.usize("n")?;
        if n == 0 {
            return Err(schema("n", "must be >= 1"));
        }
        if !(p.f64("beta")? >= 0.0) {
            return Err(schema("beta", "must be >= 0"));
        }
        match p.str("mode")? {
            "exact" if n > MAX_EXACT_N => Err(schema("n", format!("exact mode needs n <= {MAX_EXACT_N}"))),
            "exact" | "chain" => field(spec, n).map(|_| ()),
            other => Err(schema("mode", format!("expected exact or chain, got `{other}`"))),
        }
    }

    fn exact_one(spec: &RunSpec, t: usize) -> Result<Map<String, Value>> {
        let p = P(spec);
        let n = p.usize("n")?;
        let inst = sk_instance(n, p.f64("beta")?, field(spec, n)?, &mut trial_stream(spec, t as u64))?;
        let rep = exact_kernel(&inst, &EPS, p.usize("t_max")?)?;
        let cond = condition_report(inst.j(), p.f64("delta")?, ANARI_RATIO_BAND)?;
        let tm = |k: usize| rep.t_mix.get(k).and_then(|x| x.1);
        Ok(fields! {
            "gap" => rep.spectral_gap.gap,
            "lambda_2" => rep.spectral_gap.lambda_2,
            "lambda_min" => rep.spectral_gap.lambda_min,
            "t_mix_0.25" => tm(0),
            "t_mix_0.1" => tm(1),
            "t_mix_0.01" => tm(2),
            "row_sum_error" => rep.row_sum_error,
            "detailed_balance_error" => rep.detailed_balance_error,
            "stationarity_error" => rep.stationarity_error,
            "max_row_abs_sum" => cond.max_row_abs_sum,
            "width" => cond.width,
            "dobrushin" => cond.dobrushin,
            "spectral_width" => cond.spectral_width,
            "anari" => cond.anari,
        })
    }

    fn shared(spec: &RunSpec) -> Result<SkInstance> {
        let p = P(spec);
        let n = p.usize("n")?;
        sk_instance(n, p.f64("beta")?, field(spec, n)?, &mut trial_stream(spec, INSTANCE_STREAM))
    }

    fn chain_one(rec: &Recorder, spec: &RunSpec, inst: &SkInstance, t: usize) -> Result<Vec<TrialRecord>> {
        let p = P(spec);
        let n = inst.n();
        let steps = p.usize("steps")?;
        let thin = match p.usize("thin")? {
            0 => (steps / 1000).max(1),
            k => k,
        };
        let mut rng = trial_stream(spec, t as u64);
        let x0 = SpinState::random(n, &mut rng);
        let flipped = SpinState::new(x0.spins().iter().map(|&v| -v).collect())?;
        let coupled = p.bool("couple")?.then_some(&flipped);
        let d = run_chain(inst, &x0, steps, &mut rng, coupled)?;
        let mut out: Vec<TrialRecord> = (thin - 1..steps)
            .step_by(thin)
            .map(|k| {
                let m = fields! {"step" => k + 1, "energy" => d.energy[k], "magnetization" => d.magnetization[k]};
                rec.record(RecordKind::Trace, Some(t), Some(t as u64), m, None)
            })
            .collect();
        let m = fields! {
            "tau_energy" => d.tau_energy,
            "tau_magnetization" => d.tau_magnetization,
            "flip_rate" => d.flip_rate,
            "coalescence_step" => d.coalescence_step,
            "energy" => d.energy.last(),
            "magnetization" => d.magnetization.last(),
            "step" => steps,
        };
        out.push(rec.record(RecordKind::Trial, Some(t), Some(t as u64), m, None));
        Ok(out)
    }

    fn record(rec: &Recorder, spec: &RunSpec, inst: Option<&SkInstance>, t: usize) -> Vec<TrialRecord> {
        let res = match inst {
            None => exact_one(spec, t).map(|m| vec![rec.record(RecordKind::Trial, Some(t), Some(t as u64), m, None)]),
            Some(inst) => chain_one(rec, spec, inst, t),
        };
        res.unwrap_or_else(|e| failed(rec, t, t as u64, &e))
    }

    fn is_chain(spec: &RunSpec) -> Result<bool> {
        Ok(P(spec).str("mode")? == "chain")
    }

    pub(super) fn trial(spec: &RunSpec, t: usize) -> Result<Vec<TrialRecord>> {
        check_trial(t, spec.trials)?;
        let inst = if is_chain(spec)? { Some(shared(spec)?) } else { None };
        Ok(record(&Recorder::new(spec), spec, inst.as_ref(), t))
    }

    pub(super) fn run(spec: &RunSpec) -> Result<RunOutput> {
        let rec = Recorder::new(spec);
        let chain = is_chain(spec)?;
        let inst = if chain { Some(shared(spec)?) } else { None };
        let records = sweep(spec.trials, |t| record(&rec, spec, inst.as_ref(), t));
        let trials: Vec<&TrialRecord> = records
            .iter()
            .filter(|r| r.kind == RecordKind::Trial && r.error.is_none())
            .collect();
        let summary = if chain {
            let inst = inst.as_ref().expect("chain instance");
            let cond = condition_report(inst.j(), P(spec).f64("delta")?, ANARI_RATIO_BAND)?;
            json!({
                "experiment": "sk",
                "mode": "chain",
                "n": inst.n(),
                "beta": inst.beta(),
                "conditions": cond,
                "trials": trials.iter().map(|r| &r.results).collect::<Vec<_>>(),
            })
        } else {
            json!({
                "experiment": "sk",
                "mode": "exact",
                "n": P(spec).usize("n")?,
                "beta": P(spec).f64("beta")?,
                "t_mix_available": P(spec).usize("n")? <= MAX_TMIX_N,
                "trials": trials.iter().map(|r| &r.results).collect::<Vec<_>>(),
            })
        };
        Ok(RunOutput { records, summary })
    }
}

mod multifreq {
    use super::*;

    fn params(spec: &RunSpec) -> Result<DetectionParams> {
        let p = P(spec);
        let mut d = DetectionParams::new(
            p.usize("n")?,
            p.usize("L")?,
            p.f64("lambda")?,
            p.str("group")?.parse().map_err(|e: LabError| schema("group", e.to_string()))?,
            spec.trials,
        );
        d.include_degenerate = p.bool("include_degenerate")?;
        d.variant = p.str("variant")?.parse().map_err(|e: LabError| schema("variant", e.to_string()))?;
        Ok(d)
    }

    pub(super) fn validate(spec: &RunSpec) -> Result<()> {
        let d = params(spec)?;
        validate_detection(&d).map_err(|e| {
            let key = if d.trials < 2 { "trials" } else { "L" };
            schema(key, e.to_string())
        })
    }

    fn records(rec: &Recorder, t: usize, res: &Result<crate::multifreq::DetectionTrial>) -> Vec<TrialRecord> {
        let tr = match res {
            Ok(tr) => tr,
            Err(e) => return failed(rec, t, 2 * t as u64, e),
        };
        let mut out = Vec::new();
        for (label, stream, stat) in [("signal", tr.signal_stream, &tr.signal), ("null", tr.null_stream, &tr.null)] {
            for (l, v) in stat.per_frequency.iter().enumerate() {
                let m = fields! {"freq" => l + 1, "label" => label, "stat" => v};
                out.push(rec.record(RecordKind::Trial, Some(t), Some(stream), m, None));
            }
            for (name, v) in [("max", stat.max), ("excess-sum", stat.excess_sum)] {
                let m = fields! {"freq" => name, "label" => label, "stat" => v};
                out.push(rec.record(RecordKind::Trial, Some(t), Some(stream), m, None));
            }
        }
        out
    }

    pub(super) fn trial(spec: &RunSpec, t: usize) -> Result<Vec<TrialRecord>> {
        check_trial(t, spec.trials)?;
        let d = params(spec)?;
        Ok(records(&Recorder::new(spec), t, &detection_trial(&d, spec.master_seed, t)))
    }

    pub(super) fn run(spec: &RunSpec) -> Result<RunOutput> {
        let rec = Recorder::new(spec);
        let d = params(spec)?;
        let results: Vec<Result<_>> = (0..spec.trials)
            .into_par_iter()
            .map(|t| detection_trial(&d, spec.master_seed, t))
            .collect();
        let mut out: Vec<TrialRecord> = results.iter().enumerate().flat_map(|(t, r)| records(&rec, t, r)).collect();
        let ok: Vec<_> = results.into_iter().filter_map(|r| r.ok()).collect();
        let report = summarize_detection(&d, spec.master_seed, ok);
        let m = fields! {
            "auc" => report.auc,
            "auc_max" => report.auc_max,
            "auc_excess_sum" => report.auc_excess_sum,
            "power" => report.power,
            "threshold" => report.threshold,
        };
        out.push(rec.record(RecordKind::Summary, None, None, m, None));
        let summary = json!({
            "experiment": "multifreq",
            "params": report.params,
            "pairs": report.trials.len(),
            "degenerate_frequencies": report.degenerate_frequencies,
            "auc": report.auc,
            "auc_max": report.auc_max,
            "auc_excess_sum": report.auc_excess_sum,
            "power": report.power,
            "threshold": report.threshold,
        });
        Ok(RunOutput { records: out, summary })
    }
}
