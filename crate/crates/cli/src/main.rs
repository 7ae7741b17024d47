use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use omnisurface::channel::{sample_channels, trial_seed, write_binary, write_json};
use omnisurface::experiment::{
    convergence_trace, run_and_write, write_trace_csv, BaseConfig, ExperimentSpec, Profile,
};
use omnisurface::modes::{solve_with_mode, ProblemKind, Scheme, SolverOptions};
use omnisurface::oracle::{power_min_oracle, sum_rate_oracle, OracleGrid};
use omnisurface::parallel::map_collect;

const ORACLE_SCHEMA: &str = "omnisurface-oracle v1";

#[derive(Parser)]
#[command(name = "omnisurface", version, about = "Beamforming and surface design for omni-surface aided downlinks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment file (JSON, or TOML by extension).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Parameter set used for keys missing from the config.
    #[arg(long, default_value = "desk")]
    profile: Profile,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Monte-Carlo sweep; writes results.csv and summary.csv.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Restrict to these schemes (repeatable).
        #[arg(long = "scheme")]
        schemes: Vec<Scheme>,
        #[arg(long)]
        problem: Option<ProblemKind>,
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Per-iteration objective of one solve on one realization.
    Trace {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "trace.csv")]
        out: PathBuf,
        #[arg(long, default_value = "ued")]
        scheme: Scheme,
        #[arg(long)]
        problem: Option<ProblemKind>,
    },
    /// Solver against brute-force search on two-element, two-user instances.
    Oracle {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "oracle.csv")]
        out: PathBuf,
        #[arg(long, default_value_t = 10)]
        instances: u64,
        /// Use the fine search grid for the sum-rate oracle too (slow).
        #[arg(long)]
        fine: bool,
    },
    /// Draws one channel realization and writes it to a file.
    Channels {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "json")]
        format: ChannelFormat,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ChannelFormat {
    Json,
    Bin,
}

fn load_spec(common: &Common, problem: Option<ProblemKind>) -> Result<ExperimentSpec> {
    let mut spec = match &common.config {
        Some(path) => ExperimentSpec::load(path, common.profile)
            .with_context(|| format!("loading {}", path.display()))?,
        None => ExperimentSpec::defaults(common.profile, problem.unwrap_or(ProblemKind::PowerMin)),
    };
    if let Some(p) = problem {
        if common.config.is_some() && p != spec.problem {
            bail!("--problem {} contradicts the config ({})", p.tag(), spec.problem.tag());
        }
    }
    if let Some(seed) = common.seed {
        spec.seed = seed;
    }
    Ok(spec)
}

fn sweep(common: Common, out: Option<PathBuf>, schemes: Vec<Scheme>, problem: Option<ProblemKind>, trials: Option<usize>) -> Result<()> {
    let mut spec = load_spec(&common, problem)?;
    if !schemes.is_empty() {
        spec.schemes = schemes;
    }
    if let Some(t) = trials {
        spec.trials = t;
    }
    spec.validate()?;
    let dir = out.or_else(|| spec.out.clone()).unwrap_or_else(|| PathBuf::from("results"));
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let start = Instant::now();
    let rows = run_and_write(&spec, &SolverOptions::default(), &dir)?;
    eprintln!(
        "{} rows in {:.1} s -> {}",
        rows.len(),
        start.elapsed().as_secs_f64(),
        dir.display()
    );
    Ok(())
}

fn trace(common: Common, out: PathBuf, scheme: Scheme, problem: Option<ProblemKind>) -> Result<()> {
    let spec = load_spec(&common, problem)?;
    let cfg = spec.base.system(spec.seed)?;
    let report = convergence_trace(&cfg, spec.problem, scheme, &SolverOptions::default())?;
    write_trace_csv(&out, spec.problem, scheme, &report)?;
    eprintln!(
        "{} iterations, final {} ({}) -> {}",
        report.iterations,
        report.final_metric(),
        report.status.tag(),
        out.display()
    );
    Ok(())
}

fn oracle(common: Common, out: PathBuf, instances: u64, fine: bool) -> Result<()> {
    let mut base = match &common.config {
        Some(_) => load_spec(&common, None)?.base,
        None => BaseConfig::profile(common.profile),
    };
    (base.n_tx, base.n_elements, base.k_r, base.k_t) = (2, 2, 1, 1);
    let seed = common.seed.unwrap_or(7);
    let rate_grid = if fine {
        OracleGrid::default()
    } else {
        OracleGrid {
            phase_levels: 8,
            zeta_levels: 6,
            refine_starts: 4,
            ..OracleGrid::default()
        }
    };
    let opts = SolverOptions::default();
    let idx: Vec<u64> = (0..instances).collect();
    let rows = map_collect(&idx, |&i| -> omnisurface::Result<[f64; 4]> {
        let cfg = base.system(trial_seed(seed, i))?;
        let ch = sample_channels(&cfg)?;
        let power = solve_with_mode(ProblemKind::PowerMin, &ch, &cfg, Scheme::Ued, &opts)?.final_metric();
        let power_ref = power_min_oracle(&ch, &cfg.targets(), cfg.noise(), &OracleGrid::default())?.value;
        let rate = solve_with_mode(ProblemKind::SumRate, &ch, &cfg, Scheme::Ued, &opts)?.final_metric();
        let rate_ref = sum_rate_oracle(&ch, cfg.noise(), cfg.power_budget, &rate_grid)?.value;
        Ok([power, power_ref, rate, rate_ref])
    });
    let mut w = create(&out)?;
    writeln!(w, "# {ORACLE_SCHEMA}; sinr_target_db={}; power_budget_dbw={}", base.sinr_target_db, base.power_budget_dbw)?;
    writeln!(w, "instance,seed,power_w,oracle_power_w,sum_rate,oracle_sum_rate")?;
    for (i, r) in rows.into_iter().enumerate() {
        let [p, pr, s, sr] = r?;
        writeln!(w, "{i},{},{p},{pr},{s},{sr}", trial_seed(seed, i as u64))?;
    }
    w.flush()?;
    Ok(())
}

fn channels(common: Common, out: PathBuf, format: ChannelFormat) -> Result<()> {
    let spec = load_spec(&common, None)?;
    let cfg = spec.base.system(spec.seed)?;
    let ch = sample_channels(&cfg)?;
    let w = create(&out)?;
    match format {
        ChannelFormat::Json => write_json(&ch, cfg.seed, w)?,
        ChannelFormat::Bin => write_binary(&ch, cfg.seed, w)?,
    }
    Ok(())
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.command {
        Command::Sweep { common, out, schemes, problem, trials } => sweep(common, out, schemes, problem, trials),
        Command::Trace { common, out, scheme, problem } => trace(common, out, scheme, problem),
        Command::Oracle { common, out, instances, fine } => oracle(common, out, instances, fine),
        Command::Channels { common, out, format } => channels(common, out, format),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
