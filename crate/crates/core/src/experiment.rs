//! Monte-Carlo sweeps and convergence traces written as CSV.
//!
//! Decibel quantities are converted to linear units only here.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::channel::{sample_channels, trial_seed, Geometry, DEFAULT_REF_GAIN};
use crate::error::{Error, Result};
use crate::model::{PathLossExponents, SolveReport, SolveStatus, SystemConfig};
use crate::modes::{solve_schemes, solve_with_mode, ProblemKind, Scheme, SchemeRun, SolverOptions};
use crate::parallel::map_collect;

pub const RESULTS_SCHEMA: &str = "omnisurface-results v1";
pub const SUMMARY_SCHEMA: &str = "omnisurface-summary v1";
pub const TRACE_SCHEMA: &str = "omnisurface-trace v1";

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn dbw_to_watts(dbw: f64) -> f64 {
    db_to_linear(dbw)
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    db_to_linear(dbm - 30.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Profile {
    /// Half-size surface for quick runs.
    Desk,
    Paper,
}

impl FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "desk" => Ok(Profile::Desk),
            "paper" => Ok(Profile::Paper),
            _ => Err(Error::InvalidConfig(format!("unknown profile `{s}` (expected desk or paper)"))),
        }
    }
}

/// System parameters in the units used to describe experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaseConfig {
    pub n_tx: usize,
    pub n_elements: usize,
    pub k_r: usize,
    pub k_t: usize,
    pub noise_dbm: f64,
    pub sinr_target_db: f64,
    pub power_budget_dbw: f64,
    pub d_bi: f64,
    pub d_iu: f64,
    #[serde(default)]
    pub pathloss_exponents: PathLossExponents,
    #[serde(default = "default_ref_gain")]
    pub ref_gain: f64,
}

fn default_ref_gain() -> f64 {
    DEFAULT_REF_GAIN
}

impl BaseConfig {
    pub fn profile(profile: Profile) -> Self {
        let paper = Self {
            n_tx: 16,
            n_elements: 128,
            k_r: 4,
            k_t: 4,
            noise_dbm: -70.0,
            sinr_target_db: 20.0,
            power_budget_dbw: 5.0,
            d_bi: 50.0,
            d_iu: 2.0,
            pathloss_exponents: PathLossExponents::default(),
            ref_gain: DEFAULT_REF_GAIN,
        };
        match profile {
            Profile::Paper => paper,
            Profile::Desk => Self {
                n_elements: 64,
                ..paper
            },
        }
    }

    pub fn system(&self, seed: u64) -> Result<SystemConfig> {
        let noise = dbm_to_watts(self.noise_dbm);
        let target = db_to_linear(self.sinr_target_db);
        let cfg = SystemConfig {
            n_tx: self.n_tx,
            n_elements: self.n_elements,
            k_r: self.k_r,
            k_t: self.k_t,
            noise_r: noise,
            noise_t: noise,
            sinr_targets_r: vec![target; self.k_r],
            sinr_targets_t: vec![target; self.k_t],
            power_budget: dbw_to_watts(self.power_budget_dbw),
            geometry: Geometry {
                d_bi: self.d_bi,
                d_iu: self.d_iu,
                angles: None,
            },
            pathloss_exponents: self.pathloss_exponents,
            ref_gain: self.ref_gain,
            seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// The swept parameter and its values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "axis", content = "values", rename_all = "snake_case")]
pub enum SweepAxis {
    /// dB
    SinrTarget(Vec<f64>),
    NElements(Vec<usize>),
    /// dBW
    PowerBudget(Vec<f64>),
    /// `(K_r, K_t)` pairs
    UserRatio(Vec<(usize, usize)>),
}

impl SweepAxis {
    pub fn name(&self) -> &'static str {
        match self {
            SweepAxis::SinrTarget(_) => "sinr_target_db",
            SweepAxis::NElements(_) => "n_elements",
            SweepAxis::PowerBudget(_) => "power_budget_dbw",
            SweepAxis::UserRatio(_) => "user_ratio",
        }
    }

    pub fn len(&self) -> usize {
        match self {
            SweepAxis::SinrTarget(v) | SweepAxis::PowerBudget(v) => v.len(),
            SweepAxis::NElements(v) => v.len(),
            SweepAxis::UserRatio(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn validate(&self) -> Result<()> {
        let increasing = |v: &[f64]| v.windows(2).all(|p| p[0] < p[1]) && v.iter().all(|x| x.is_finite());
        let ok = match self {
            SweepAxis::SinrTarget(v) | SweepAxis::PowerBudget(v) => increasing(v),
            SweepAxis::NElements(v) => v.windows(2).all(|p| p[0] < p[1]) && v.iter().all(|m| *m > 0),
            SweepAxis::UserRatio(v) => {
                let r: Vec<f64> = v.iter().map(|(a, b)| *a as f64 / (*a + *b).max(1) as f64).collect();
                increasing(&r) && v.iter().all(|(a, b)| a + b > 0)
            }
        };
        if self.is_empty() {
            return Err(Error::InvalidConfig("sweep has no values".into()));
        }
        if !ok {
            return Err(Error::InvalidConfig(format!("{} values must be strictly increasing", self.name())));
        }
        Ok(())
    }

    /// Label and configuration of the `i`-th point.
    fn point(&self, i: usize, base: &BaseConfig) -> (String, BaseConfig) {
        let mut b = base.clone();
        let label = match self {
            SweepAxis::SinrTarget(v) => {
                b.sinr_target_db = v[i];
                v[i].to_string()
            }
            SweepAxis::NElements(v) => {
                b.n_elements = v[i];
                v[i].to_string()
            }
            SweepAxis::PowerBudget(v) => {
                b.power_budget_dbw = v[i];
                v[i].to_string()
            }
            SweepAxis::UserRatio(v) => {
                (b.k_r, b.k_t) = v[i];
                format!("{}/{}", v[i].0, v[i].1)
            }
        };
        (label, b)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub problem: ProblemKind,
    pub sweep: SweepAxis,
    pub trials: usize,
    pub schemes: Vec<Scheme>,
    pub base: BaseConfig,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

impl ExperimentSpec {
    pub fn defaults(profile: Profile, problem: ProblemKind) -> Self {
        let sweep = match problem {
            ProblemKind::PowerMin => SweepAxis::SinrTarget(vec![0.0, 5.0, 10.0, 15.0, 20.0]),
            ProblemKind::SumRate => SweepAxis::PowerBudget(vec![-5.0, 0.0, 5.0, 10.0, 15.0]),
        };
        Self {
            problem,
            sweep,
            trials: 20,
            schemes: Scheme::ALL.to_vec(),
            base: BaseConfig::profile(profile),
            seed: 1,
            out: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidConfig("trials must be at least 1".into()));
        }
        if self.schemes.is_empty() {
            return Err(Error::InvalidConfig("no schemes selected".into()));
        }
        self.sweep.validate()?;
        for i in 0..self.sweep.len() {
            self.sweep.point(i, &self.base).1.system(self.seed)?;
        }
        Ok(())
    }

    /// Reads a JSON or TOML file and fills missing keys from the profile.
    /// A `sweep` table, when present, replaces the default sweep whole.
    pub fn load(path: &Path, profile: Profile) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        let is_toml = path.extension().is_some_and(|e| e == "toml");
        Self::parse(&text, is_toml, profile)
    }

    pub fn parse(text: &str, is_toml: bool, profile: Profile) -> Result<Self> {
        let user: Value = if is_toml {
            let t: toml::Value = toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
            serde_json::to_value(t)?
        } else {
            serde_json::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?
        };
        if !user.is_object() {
            return Err(Error::InvalidConfig("configuration must be a table".into()));
        }
        let problem = match user.get("problem") {
            Some(p) => serde_json::from_value(p.clone()).map_err(|e| Error::InvalidConfig(e.to_string()))?,
            None => ProblemKind::PowerMin,
        };
        let mut merged = serde_json::to_value(Self::defaults(profile, problem))?;
        merge(&mut merged, user, true);
        let spec: Self = serde_json::from_value(merged).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }
}

fn merge(into: &mut Value, from: Value, top: bool) {
    match (into, from) {
        (Value::Object(a), Value::Object(b)) => {
            for (k, v) in b {
                match a.get_mut(&k) {
                    Some(slot) if !(top && k == "sweep") => merge(slot, v, false),
                    _ => {
                        a.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// One CSV row: a scheme's outcome on one trial at one sweep point.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRow {
    pub point: usize,
    pub axis_value: String,
    pub scheme: Scheme,
    pub trial: usize,
    pub seed: u64,
    /// Total power in watts or sum-rate in bit/s/Hz.
    pub objective: f64,
    pub iterations: usize,
    pub status: SolveStatus,
    pub wall_time_s: f64,
}

/// Runs every (point, trial) pair in parallel; all schemes of a pair share one
/// channel realization. Rows come back ordered by point, scheme, trial.
pub fn run_experiment(spec: &ExperimentSpec, opts: &SolverOptions) -> Result<Vec<TrialRow>> {
    spec.validate()?;
    let jobs: Vec<(usize, usize)> = (0..spec.sweep.len())
        .flat_map(|p| (0..spec.trials).map(move |t| (p, t)))
        .collect();
    let outcomes: Vec<Result<Vec<SchemeRun>>> = map_collect(&jobs, |&(p, t)| {
        let (_, base) = spec.sweep.point(p, &spec.base);
        let cfg = base.system(trial_seed(spec.seed, t as u64))?;
        let channels = sample_channels(&cfg)?;
        solve_schemes(spec.problem, &channels, &cfg, &spec.schemes, opts)
    });
    let mut rows = Vec::with_capacity(jobs.len() * spec.schemes.len());
    for (&(p, t), outcome) in jobs.iter().zip(outcomes) {
        let (label, _) = spec.sweep.point(p, &spec.base);
        for run in outcome? {
            rows.push(TrialRow {
                point: p,
                axis_value: label.clone(),
                scheme: run.scheme,
                trial: t,
                seed: trial_seed(spec.seed, t as u64),
                objective: run.report.final_metric(),
                iterations: run.report.iterations,
                status: run.report.status,
                wall_time_s: run.wall_time.as_secs_f64(),
            });
        }
    }
    let scheme_rank = |s: Scheme| spec.schemes.iter().position(|x| *x == s).unwrap_or(usize::MAX);
    rows.sort_by_key(|r| (r.point, scheme_rank(r.scheme), r.trial));
    Ok(rows)
}

fn objective_label(problem: ProblemKind) -> &'static str {
    match problem {
        ProblemKind::PowerMin => "total transmit power (W)",
        ProblemKind::SumRate => "sum-rate (bit/s/Hz)",
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
    }
    let f = File::create(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    Ok(BufWriter::new(f))
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

fn finish(w: csv::Writer<BufWriter<File>>) -> Result<()> {
    let mut inner = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
    inner.flush()?;
    Ok(())
}

pub fn write_results_csv(path: &Path, spec: &ExperimentSpec, rows: &[TrialRow]) -> Result<()> {
    let mut out = create(path)?;
    writeln!(
        out,
        "# {RESULTS_SCHEMA}; problem={}; axis={}; objective={}; seed={}",
        spec.problem.tag(),
        spec.sweep.name(),
        objective_label(spec.problem),
        spec.seed
    )?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "axis_value",
        "scheme",
        "trial",
        "seed",
        "objective",
        "iterations",
        "status",
        "wall_time_s",
    ])
    .map_err(csv_err)?;
    for r in rows {
        w.write_record([
            r.axis_value.clone(),
            r.scheme.tag().to_string(),
            r.trial.to_string(),
            r.seed.to_string(),
            r.objective.to_string(),
            r.iterations.to_string(),
            r.status.tag().to_string(),
            format!("{:.6}", r.wall_time_s),
        ])
        .map_err(csv_err)?;
    }
    finish(w)
}

/// Per point and scheme: mean over feasible trials and share of infeasible ones.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub axis_value: String,
    pub scheme: Scheme,
    pub trials: usize,
    pub feasible: usize,
    pub infeasible_rate: f64,
    pub mean_objective: Option<f64>,
    pub mean_iterations: Option<f64>,
}

pub fn summarize(rows: &[TrialRow]) -> Vec<SummaryRow> {
    let mut out: Vec<SummaryRow> = Vec::new();
    for group in rows.chunk_by(|a, b| a.point == b.point && a.scheme == b.scheme) {
        let feasible: Vec<&TrialRow> = group.iter().filter(|r| r.status != SolveStatus::Infeasible).collect();
        let n = feasible.len();
        let mean = |f: &dyn Fn(&TrialRow) -> f64| (n > 0).then(|| feasible.iter().map(|r| f(r)).sum::<f64>() / n as f64);
        out.push(SummaryRow {
            axis_value: group[0].axis_value.clone(),
            scheme: group[0].scheme,
            trials: group.len(),
            feasible: n,
            infeasible_rate: (group.len() - n) as f64 / group.len() as f64,
            mean_objective: mean(&|r| r.objective),
            mean_iterations: mean(&|r| r.iterations as f64),
        });
    }
    out
}

pub fn write_summary_csv(path: &Path, spec: &ExperimentSpec, rows: &[SummaryRow]) -> Result<()> {
    let mut out = create(path)?;
    writeln!(
        out,
        "# {SUMMARY_SCHEMA}; problem={}; axis={}; objective={}; means exclude infeasible trials",
        spec.problem.tag(),
        spec.sweep.name(),
        objective_label(spec.problem)
    )?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "axis_value",
        "scheme",
        "trials",
        "feasible",
        "infeasible_rate",
        "mean_objective",
        "mean_iterations",
    ])
    .map_err(csv_err)?;
    let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
    for r in rows {
        w.write_record([
            r.axis_value.clone(),
            r.scheme.tag().to_string(),
            r.trials.to_string(),
            r.feasible.to_string(),
            r.infeasible_rate.to_string(),
            opt(r.mean_objective),
            opt(r.mean_iterations),
        ])
        .map_err(csv_err)?;
    }
    finish(w)
}

/// Runs a sweep and writes `results.csv` and `summary.csv` under `dir`.
pub fn run_and_write(spec: &ExperimentSpec, opts: &SolverOptions, dir: &Path) -> Result<Vec<TrialRow>> {
    let rows = run_experiment(spec, opts)?;
    write_results_csv(&dir.join("results.csv"), spec, &rows)?;
    write_summary_csv(&dir.join("summary.csv"), spec, &summarize(&rows))?;
    Ok(rows)
}

/// One solve of `scheme` from its cold start on the realization drawn from
/// `cfg.seed`.
pub fn convergence_trace(
    cfg: &SystemConfig,
    problem: ProblemKind,
    scheme: Scheme,
    opts: &SolverOptions,
) -> Result<SolveReport> {
    cfg.validate()?;
    let channels = sample_channels(cfg)?;
    solve_with_mode(problem, &channels, cfg, scheme, opts)
}

pub fn write_trace_csv(path: &Path, problem: ProblemKind, scheme: Scheme, report: &SolveReport) -> Result<()> {
    let mut out = create(path)?;
    writeln!(
        out,
        "# {TRACE_SCHEMA}; problem={}; scheme={}; status={}; objective={}",
        problem.tag(),
        scheme.tag(),
        report.status.tag(),
        match problem {
            ProblemKind::PowerMin => objective_label(problem),
            ProblemKind::SumRate => "weighted MSE objective",
        }
    )?;
    let mut w = csv::Writer::from_writer(out);
    match problem {
        ProblemKind::PowerMin => {
            w.write_record(["iteration", "objective"]).map_err(csv_err)?;
            for (i, v) in report.objective_trace.iter().enumerate() {
                w.write_record([i.to_string(), v.to_string()]).map_err(csv_err)?;
            }
        }
        ProblemKind::SumRate => {
            w.write_record(["iteration", "objective", "sum_rate"]).map_err(csv_err)?;
            for (i, (v, r)) in report.objective_trace.iter().zip(&report.rate_trace).enumerate() {
                w.write_record([i.to_string(), v.to_string(), r.to_string()])
                    .map_err(csv_err)?;
            }
        }
    }
    finish(w)
}
