//! Surface control modes and the comparison schemes built on them.
//!
//! Every scheme reuses the two joint solvers; a mode only fixes or frees the
//! energy split (and, for time division, splits the users into two slots).

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    total_power, Beamformers, ChannelSet, ControlMode, IosState, RVector, Solution, SolveReport, SolveStatus,
    SystemConfig,
};
use crate::power_min::{aligned_start, power_min_from, random_phases, solve_tx_beamforming, Plan, PowerMinOptions};
use crate::sumrate::{matched_filter_start, sum_rate_from, SumRateOptions};

/// A mode together with its parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeSpec {
    pub mode: ControlMode,
    /// For space division: `true` marks a reflecting element.
    pub partition: Option<Vec<bool>>,
    /// For time division: share of time given to the reflected users.
    pub time_split: f64,
}

impl ModeSpec {
    pub fn new(mode: ControlMode) -> Self {
        Self {
            mode,
            partition: None,
            time_split: 0.5,
        }
    }

    pub fn space_division(partition: Vec<bool>) -> Self {
        Self {
            partition: Some(partition),
            ..Self::new(ControlMode::Sd)
        }
    }
}

/// The first `⌈M·K_r/(K_r+K_t)⌉` elements reflect, the rest transmit.
pub fn default_partition(m: usize, k_r: usize, k_t: usize) -> Vec<bool> {
    let k = (k_r + k_t).max(1);
    let n_reflect = (m * k_r).div_ceil(k);
    (0..m).map(|i| i < n_reflect).collect()
}

/// Constrains a surface state to a mode.
pub fn project_mode(ios: &IosState, spec: &ModeSpec) -> Result<IosState> {
    let m = ios.n_elements();
    let mut out = ios.clone();
    out.mode = spec.mode;
    match spec.mode {
        ControlMode::Ued | ControlMode::NoIos => {}
        ControlMode::Eed => out.zeta = RVector::from_element(m, std::f64::consts::FRAC_1_SQRT_2),
        ControlMode::TdReflect | ControlMode::Irs => out.zeta = RVector::from_element(m, 1.0),
        ControlMode::TdTransmit => out.zeta = RVector::zeros(m),
        ControlMode::Sd => {
            let p = spec
                .partition
                .as_ref()
                .ok_or_else(|| Error::InvalidMode("space division needs an element partition".into()))?;
            if p.len() != m {
                return Err(Error::InvalidMode(format!("partition covers {} of {m} elements", p.len())));
            }
            out.zeta = RVector::from_iterator(m, p.iter().map(|r| if *r { 1.0 } else { 0.0 }));
        }
    }
    if matches!(spec.mode, ControlMode::TdReflect | ControlMode::TdTransmit)
        && !(spec.time_split > 0.0 && spec.time_split < 1.0)
    {
        return Err(Error::InvalidMode(format!("time split {} outside (0, 1)", spec.time_split)));
    }
    Ok(out)
}

/// Comparison schemes, by command-line tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Scheme {
    Ued,
    Eed,
    Sd,
    Td,
    RandomEed,
    Irs,
    NoIos,
}

impl Scheme {
    pub const ALL: [Scheme; 7] = [
        Scheme::Ued,
        Scheme::Eed,
        Scheme::Sd,
        Scheme::Td,
        Scheme::RandomEed,
        Scheme::Irs,
        Scheme::NoIos,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Scheme::Ued => "ued",
            Scheme::Eed => "eed",
            Scheme::Sd => "sd",
            Scheme::Td => "td",
            Scheme::RandomEed => "random-eed",
            Scheme::Irs => "irs",
            Scheme::NoIos => "none",
        }
    }

    /// The mode a single-slot scheme runs in. Time division reports its
    /// reflecting slot.
    pub fn mode_spec(self, m: usize, k_r: usize, k_t: usize) -> ModeSpec {
        match self {
            Scheme::Ued => ModeSpec::new(ControlMode::Ued),
            Scheme::Eed | Scheme::RandomEed => ModeSpec::new(ControlMode::Eed),
            Scheme::Sd => ModeSpec::space_division(default_partition(m, k_r, k_t)),
            Scheme::Td => ModeSpec::new(ControlMode::TdReflect),
            Scheme::Irs => ModeSpec::new(ControlMode::Irs),
            Scheme::NoIos => ModeSpec::new(ControlMode::NoIos),
        }
    }

    fn plan(self) -> Plan {
        match self {
            Scheme::Ued => Plan::FULL,
            Scheme::Eed | Scheme::Sd | Scheme::Td | Scheme::Irs => Plan {
                optimize_phases: true,
                optimize_zeta: false,
            },
            Scheme::RandomEed | Scheme::NoIos => Plan {
                optimize_phases: false,
                optimize_zeta: false,
            },
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|x| x.tag() == s)
            .ok_or_else(|| Error::InvalidMode(format!("unknown scheme `{s}`")))
    }
}

impl TryFrom<String> for Scheme {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Scheme> for String {
    fn from(s: Scheme) -> String {
        s.tag().to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProblemKind {
    PowerMin,
    SumRate,
}

impl ProblemKind {
    pub fn tag(self) -> &'static str {
        match self {
            ProblemKind::PowerMin => "power-min",
            ProblemKind::SumRate => "sum-rate",
        }
    }
}

impl FromStr for ProblemKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [ProblemKind::PowerMin, ProblemKind::SumRate]
            .into_iter()
            .find(|p| p.tag() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown problem `{s}` (expected power-min or sum-rate)")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SolverOptions {
    pub power_min: PowerMinOptions,
    pub sum_rate: SumRateOptions,
}

/// Seed for the random phases of the random-phase baseline.
fn random_phase_seed(seed: u64) -> u64 {
    seed ^ 0x005E_ED0F_9A5E
}

/// Starting surface for a scheme before any warm start.
fn cold_start(scheme: Scheme, channels: &ChannelSet, seed: u64) -> Result<IosState> {
    let m = channels.n_elements();
    let spec = scheme.mode_spec(m, channels.k_r(), channels.k_t());
    let probe = IosState::uniform(m, std::f64::consts::FRAC_1_SQRT_2, spec.mode);
    let zeta = project_mode(&probe, &spec)?.zeta;
    let ios = match scheme {
        Scheme::RandomEed => {
            let mut rng = ChaCha20Rng::seed_from_u64(random_phase_seed(seed));
            let mut ios = probe;
            ios.phi_r = random_phases(&mut rng, m);
            ios.phi_t = random_phases(&mut rng, m);
            ios
        }
        Scheme::NoIos => probe,
        _ => aligned_start(channels, zeta, spec.mode),
    };
    project_mode(&ios, &spec)
}

fn run_single(
    problem: ProblemKind,
    scheme: Scheme,
    channels: &ChannelSet,
    cfg: &SystemConfig,
    starts: Vec<Solution>,
    opts: &SolverOptions,
) -> Result<SolveReport> {
    let targets = cfg.targets();
    match problem {
        ProblemKind::PowerMin => {
            let mut inits: Vec<(f64, IosState)> = starts
                .into_iter()
                .map(|s| {
                    let p = solve_tx_beamforming(channels, &s.ios, &targets, cfg.noise(), &opts.power_min)
                        .map(|w| total_power(&w))
                        .unwrap_or(f64::INFINITY);
                    (p, s.ios)
                })
                .collect();
            inits.sort_by(|a, b| a.0.total_cmp(&b.0));
            let inits: Vec<IosState> = inits.into_iter().map(|x| x.1).collect();
            power_min_from(
                channels,
                &targets,
                cfg.noise(),
                &inits,
                scheme.plan(),
                cfg.seed,
                &opts.power_min,
                None,
            )
        }
        ProblemKind::SumRate => {
            let mut best: Option<(f64, Solution)> = None;
            for s in starts {
                let rate = crate::model::sum_rate(channels, &s.ios, &s.beamformers, cfg.noise())?;
                if best.as_ref().is_none_or(|b| rate > b.0) {
                    best = Some((rate, s));
                }
            }
            let (_, init) = best.ok_or(Error::Empty("starting designs"))?;
            sum_rate_from(
                channels,
                cfg.noise(),
                cfg.power_budget,
                init,
                scheme.plan(),
                &opts.sum_rate,
                None,
            )
        }
    }
}

fn cold_solution(scheme: Scheme, channels: &ChannelSet, cfg: &SystemConfig) -> Result<Solution> {
    let ios = cold_start(scheme, channels, cfg.seed)?;
    let beamformers = matched_filter_start(channels, &ios, cfg.power_budget)?;
    Ok(Solution { beamformers, ios })
}

fn pad_last(v: &[f64], len: usize) -> impl Iterator<Item = f64> + '_ {
    let last = v.last().copied().unwrap_or(0.0);
    v.iter().copied().chain(std::iter::repeat(last)).take(len)
}

fn solve_time_division(
    problem: ProblemKind,
    channels: &ChannelSet,
    cfg: &SystemConfig,
    opts: &SolverOptions,
) -> Result<SolveReport> {
    let tau = 0.5;
    let m = channels.n_elements();
    let (k_r, k_t) = (channels.k_r(), channels.k_t());
    let slot = |subset: ChannelSet, mode: ControlMode, targets: Vec<f64>| -> Result<Option<SolveReport>> {
        if subset.n_users() == 0 {
            return Ok(None);
        }
        let mut sub = cfg.clone();
        sub.k_r = subset.k_r();
        sub.k_t = subset.k_t();
        sub.sinr_targets_r = targets[..sub.k_r].to_vec();
        sub.sinr_targets_t = targets[sub.k_r..].to_vec();
        sub.geometry.angles = None;
        let spec = ModeSpec::new(mode);
        let zeta = project_mode(&IosState::uniform(m, 0.5, mode), &spec)?.zeta;
        let ios = project_mode(&aligned_start(&subset, zeta, mode), &spec)?;
        let beamformers = matched_filter_start(&subset, &ios, cfg.power_budget)?;
        run_single(problem, Scheme::Td, &subset, &sub, vec![Solution { beamformers, ios }], opts).map(Some)
    };
    let reflect = slot(channels.reflected_only(), ControlMode::TdReflect, cfg.sinr_targets_r.clone())?;
    let transmit = slot(channels.transmitted_only(), ControlMode::TdTransmit, cfg.sinr_targets_t.clone())?;

    let n_tx = channels.n_tx();
    let mut ios = IosState::uniform(m, 1.0, ControlMode::TdReflect);
    let mut w = Beamformers::zeros(n_tx, k_r, k_t);
    if let Some(r) = &reflect {
        ios.phi_r = r.solution.ios.phi_r.clone();
        w.w_r = r.solution.beamformers.w_r.clone();
    }
    if let Some(t) = &transmit {
        ios.phi_t = t.solution.ios.phi_t.clone();
        w.w_t = t.solution.beamformers.w_t.clone();
    }
    let slots: Vec<&SolveReport> = reflect.iter().chain(transmit.iter()).collect();
    let solution = Solution { beamformers: w, ios };
    if slots.iter().any(|s| s.status == SolveStatus::Infeasible) {
        let mut rep = SolveReport::infeasible(solution);
        rep.solution.beamformers = Beamformers::zeros(n_tx, k_r, k_t);
        return Ok(rep);
    }
    let iterations = slots.iter().map(|s| s.iterations).max().unwrap_or(0);
    let len = iterations + 1;
    let status = if slots.iter().all(|s| s.status == SolveStatus::Converged) {
        SolveStatus::Converged
    } else {
        SolveStatus::MaxIters
    };
    let zeros = vec![0.0; len];
    let trace_of = |r: &Option<SolveReport>, rate: bool| -> Vec<f64> {
        match r {
            Some(r) if rate => pad_last(&r.rate_trace, len).collect(),
            Some(r) => pad_last(&r.objective_trace, len).collect(),
            None => zeros.clone(),
        }
    };
    let (objective_trace, rate_trace) = match problem {
        ProblemKind::PowerMin => {
            let (a, b) = (trace_of(&reflect, false), trace_of(&transmit, false));
            (a.iter().zip(&b).map(|(x, y)| x.max(*y)).collect(), Vec::new())
        }
        ProblemKind::SumRate => {
            // an empty slot contributes zero rate and a zero objective
            let (oa, ob) = (trace_of(&reflect, false), trace_of(&transmit, false));
            let (ra, rb) = (trace_of(&reflect, true), trace_of(&transmit, true));
            (
                oa.iter().zip(&ob).map(|(x, y)| tau * x + (1.0 - tau) * y).collect(),
                ra.iter().zip(&rb).map(|(x, y)| tau * x + (1.0 - tau) * y).collect(),
            )
        }
    };
    Ok(SolveReport {
        objective_trace,
        rate_trace,
        solution,
        status,
        iterations,
    })
}

/// Runs one scheme from its own cold start.
pub fn solve_with_mode(
    problem: ProblemKind,
    channels: &ChannelSet,
    cfg: &SystemConfig,
    scheme: Scheme,
    opts: &SolverOptions,
) -> Result<SolveReport> {
    channels.check_config(cfg)?;
    if scheme == Scheme::Td {
        return solve_time_division(problem, channels, cfg, opts);
    }
    run_single(problem, scheme, channels, cfg, vec![cold_solution(scheme, channels, cfg)?], opts)
}

/// One scheme's report on one realization.
#[derive(Debug, Clone)]
pub struct SchemeRun {
    pub scheme: Scheme,
    pub report: SolveReport,
    pub wall_time: Duration,
}

fn usable(rep: &SolveReport) -> bool {
    rep.status != SolveStatus::Infeasible
}

fn as_mode(sol: &Solution, scheme: Scheme, channels: &ChannelSet) -> Result<Solution> {
    let spec = scheme.mode_spec(channels.n_elements(), channels.k_r(), channels.k_t());
    Ok(Solution {
        beamformers: sol.beamformers.clone(),
        ios: project_mode(&sol.ios, &spec)?,
    })
}

/// Runs several schemes on one realization with warm starts chosen so that
/// nested feasible sets give ordered results: the equal split may start from
/// the random-phase design, and the unequal split from the better of the
/// equal-split and space-division designs. Reports follow the input order.
pub fn solve_schemes(
    problem: ProblemKind,
    channels: &ChannelSet,
    cfg: &SystemConfig,
    schemes: &[Scheme],
    opts: &SolverOptions,
) -> Result<Vec<SchemeRun>> {
    channels.check_config(cfg)?;
    let mut order: Vec<Scheme> = schemes.to_vec();
    order.sort();
    order.dedup();
    // dependencies first
    let rank = |s: &Scheme| match s {
        Scheme::RandomEed => 0,
        Scheme::Eed => 1,
        Scheme::Sd => 2,
        Scheme::Ued => 3,
        _ => 4,
    };
    order.sort_by_key(rank);

    let mut done: Vec<SchemeRun> = Vec::new();
    let find = |done: &[SchemeRun], s: Scheme| {
        done.iter()
            .find(|r| r.scheme == s && usable(&r.report))
            .map(|r| r.report.solution.clone())
    };
    for scheme in order {
        let clock = Instant::now();
        let report = match scheme {
            Scheme::Td => solve_time_division(problem, channels, cfg, opts)?,
            Scheme::Eed | Scheme::Ued => {
                let mut starts = vec![cold_solution(scheme, channels, cfg)?];
                let donors: &[Scheme] = if scheme == Scheme::Eed {
                    &[Scheme::RandomEed]
                } else {
                    &[Scheme::Eed, Scheme::Sd]
                };
                for d in donors {
                    if let Some(sol) = find(&done, *d) {
                        starts.push(as_mode(&sol, scheme, channels)?);
                    }
                }
                run_single(problem, scheme, channels, cfg, starts, opts)?
            }
            _ => run_single(problem, scheme, channels, cfg, vec![cold_solution(scheme, channels, cfg)?], opts)?,
        };
        done.push(SchemeRun {
            scheme,
            report,
            wall_time: clock.elapsed(),
        });
    }
    schemes
        .iter()
        .map(|s| {
            done.iter()
                .find(|r| r.scheme == *s)
                .cloned()
                .ok_or(Error::InvalidMode(format!("scheme {s} was not run")))
        })
        .collect()
}
