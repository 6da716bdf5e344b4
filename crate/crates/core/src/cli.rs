//! Command-line front end.
//!
//! Exit codes: 0 on success, 1 when an environment assumption or a domain
//! check fails, 2 on I/O or schema errors.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::{ConfigError, ExperimentConfig};
use crate::env::{check_moment_bound, check_truncated_nonneg, gap_vector, EnvKind};
use crate::error::Error;
use crate::harness::{check_preconditions, mean_and_std_error, monte_carlo, run, RunOptions, RunResult};
use crate::output::{
    parse_rounds, read_csv, replay_audit, write_fit_json, write_regret_csv, write_rounds_csv,
    write_scaling_csv, FitSummary, OutputError,
};
use crate::scaling::{fit_scaling, floor_regrets, least_squares};

pub const EXIT_OK: i32 = 0;
pub const EXIT_DOMAIN: i32 = 1;
pub const EXIT_IO: i32 = 2;

/// Non-positive mean regrets are raised to this value before a log-log fit.
pub const REGRET_FLOOR: f64 = 1e-9;

#[derive(Debug, Parser)]
#[command(name = "htbandit", version, about = "Heavy-tailed bandit experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check the configured environment against the policy's assumptions.
    CheckEnv {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run Monte-Carlo trajectories; writes regret.csv, the effective config.json,
    /// and with --diagnostics one rounds_<T>_<rep>.csv per trajectory.
    Run(RunArgs),
    /// Re-audit a rounds file written by `run --diagnostics`.
    Audit {
        rounds: PathBuf,
        /// Number of arms.
        #[arg(short = 'k', long = "arms")]
        k: usize,
        /// Horizon of the run that produced the file.
        #[arg(short = 'T', long = "horizon")]
        horizon: u64,
        /// Config whose digest the file is expected to carry.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Run the horizon grid and fit scaling laws; writes scaling.csv and fit.json.
    Sweep(RunArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory (defaults to the config's `output_dir`, then `.`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub reps: Option<usize>,
    /// Base seed override.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub diagnostics: bool,
}

enum Failure {
    Domain(String),
    Io(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Io(e.to_string())
    }
}

impl From<OutputError> for Failure {
    fn from(e: OutputError) -> Self {
        Failure::Io(e.to_string())
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Domain(e.to_string())
    }
}

type CmdResult = Result<i32, Failure>;

/// Parses `std::env::args` and runs the command, returning the exit code.
pub fn main_from_args() -> i32 {
    match Cli::try_parse() {
        Ok(cli) => execute(cli),
        Err(e) => {
            let code = if e.use_stderr() { EXIT_IO } else { EXIT_OK };
            let _ = e.print();
            code
        }
    }
}

pub fn execute(cli: Cli) -> i32 {
    configure_threads();
    let result = match cli.command {
        Command::CheckEnv { config } => cmd_check_env(&config),
        Command::Run(args) => cmd_run(&args),
        Command::Audit {
            rounds,
            k,
            horizon,
            config,
        } => cmd_audit(&rounds, k, horizon, config.as_deref()),
        Command::Sweep(args) => cmd_sweep(&args),
    };
    match result {
        Ok(code) => code,
        Err(Failure::Domain(m)) => {
            eprintln!("error: {m}");
            EXIT_DOMAIN
        }
        Err(Failure::Io(m)) => {
            eprintln!("error: {m}");
            EXIT_IO
        }
    }
}

fn configure_threads() {
    if let Ok(v) = std::env::var("HTBANDIT_THREADS") {
        match v.parse::<usize>() {
            Ok(n) if n > 0 => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            _ => eprintln!("warning: ignoring HTBANDIT_THREADS={v}"),
        }
    }
}

fn load(args: &RunArgs) -> Result<ExperimentConfig, Failure> {
    let mut cfg = ExperimentConfig::load(&args.config)?;
    if let Some(r) = args.reps {
        cfg.reps = r;
    }
    if let Some(s) = args.seed {
        cfg.base_seed = s;
    }
    if args.diagnostics {
        cfg.diagnostics = true;
    }
    cfg.check_schema()?;
    Ok(cfg)
}

fn out_dir(args: &RunArgs, cfg: &ExperimentConfig) -> Result<PathBuf, Failure> {
    let dir = args
        .out
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir).map_err(|e| Failure::Io(format!("{}: {e}", dir.display())))?;
    Ok(dir)
}

/// Files written so far by a command; removed again unless the command succeeds.
struct Outputs {
    paths: Vec<PathBuf>,
    committed: bool,
}

impl Outputs {
    fn new() -> Self {
        Self {
            paths: Vec::new(),
            committed: false,
        }
    }

    fn track(&mut self, p: PathBuf) -> PathBuf {
        self.paths.push(p.clone());
        p
    }
}

impl Drop for Outputs {
    fn drop(&mut self) {
        if !self.committed {
            for p in &self.paths {
                let _ = std::fs::remove_file(p);
            }
        }
    }
}

fn cmd_check_env(path: &Path) -> CmdResult {
    let cfg = ExperimentConfig::load(path)?;
    let mut ok = true;
    for &t in distinct_envs(&cfg) {
        let env = match cfg.environment_for(t) {
            Ok(e) => e,
            Err(e) => {
                println!("environment for T = {t}: {e}");
                ok = false;
                continue;
            }
        };
        if cfg.switching.is_some() {
            println!("== switching schedule for T = {t}");
        }
        let moments = check_moment_bound(&env);
        print!("{moments}");
        ok &= moments.passed();

        match &env.kind {
            EnvKind::Stochastic { arms } => {
                for (i, a) in arms.iter().enumerate() {
                    let c = check_truncated_nonneg(a);
                    println!(
                        "arm {i}: truncated non-negative {}{}",
                        if c.holds { "yes" } else { "no" },
                        c.witness.map(|m| format!(" (witness M = {m})")).unwrap_or_default()
                    );
                }
                match gap_vector(&env) {
                    Ok(g) => println!(
                        "unique best arm {} with gaps {:?}, minimum gap {}",
                        g.best, g.deltas, g.delta_min
                    ),
                    Err(Error::NonUniqueBestArm(ties)) => {
                        println!("unique best arm violated: arms {ties:?} share the minimal mean");
                        ok = false;
                    }
                    Err(e) => {
                        println!("gap check failed: {e}");
                        ok = false;
                    }
                }
            }
            EnvKind::AdversarialSchedule { phases } => {
                println!("{} phases, schedule length {}", phases.len(), env.schedule_length().unwrap_or(0));
                if let Ok(b) = env.benchmark_arm(t) {
                    println!("benchmark arm {b}");
                }
            }
        }
        match check_preconditions(&env, t) {
            Ok(best) => println!("T = {t}: all assumptions hold (benchmark arm {best})"),
            Err(e) => {
                println!("T = {t}: {e}");
                ok = false;
            }
        }
    }
    println!("{}", if ok { "PASS" } else { "FAIL" });
    Ok(if ok { EXIT_OK } else { EXIT_DOMAIN })
}

/// One horizon suffices for a fixed environment; switching schedules depend on T.
fn distinct_envs(cfg: &ExperimentConfig) -> &[u64] {
    if cfg.switching.is_some() {
        &cfg.horizons
    } else {
        &cfg.horizons[cfg.horizons.len() - 1..]
    }
}

/// The gates of `check-env`; unlike the library, a tie for the best arm is
/// rejected even when the tied arms share one law.
fn check_all(cfg: &ExperimentConfig) -> Result<(), Failure> {
    for &t in distinct_envs(cfg) {
        let env = cfg.environment_for(t)?;
        check_preconditions(&env, t)?;
        if env.is_stochastic() {
            gap_vector(&env)?;
        }
    }
    Ok(())
}

fn cmd_run(args: &RunArgs) -> CmdResult {
    let cfg = load(args)?;
    check_all(&cfg)?;
    let digest = cfg.digest();
    let dir = out_dir(args, &cfg)?;
    let mut outputs = Outputs::new();
    let mut results: Vec<(usize, RunResult)> = Vec::new();

    for &t in &cfg.horizons {
        let env = cfg.environment_for(t)?;
        if cfg.diagnostics {
            for rep in 0..cfg.reps {
                let seed = cfg.base_seed.wrapping_add(rep as u64);
                let mut r = run(&cfg.policy, &env, t, seed, RunOptions::with_records())
                    .map_err(|e| Error::Rep { rep, source: Box::new(e) })?;
                if let Some(records) = r.records.take() {
                    let p = outputs.track(dir.join(format!("rounds_{t}_{rep}.csv")));
                    write_rounds_csv(&p, &digest, &records)?;
                }
                if let Some(a) = &r.audit {
                    if !a.passed() {
                        eprintln!("warning: T = {t}, rep {rep}: {} audit violations", a.violations.len());
                    }
                }
                results.push((rep, r));
            }
        } else {
            let mc = monte_carlo(&cfg.policy, &env, t, cfg.reps, cfg.base_seed, RunOptions::default())?;
            results.extend(mc.runs.into_iter().enumerate());
        }
        let (mean, se) = mean_and_std_error(
            &results.iter().filter(|(_, r)| r.horizon == t).map(|(_, r)| r.pseudo_regret).collect::<Vec<_>>(),
        );
        println!("T = {t}: mean regret {mean:.6} ± {se:.6} over {} reps", cfg.reps);
    }

    let cp = outputs.track(dir.join("config.json"));
    std::fs::write(&cp, cfg.to_json_pretty() + "\n")
        .map_err(|e| Failure::Io(format!("{}: {e}", cp.display())))?;
    let p = outputs.track(dir.join("regret.csv"));
    let rows: Vec<(usize, &RunResult)> = results.iter().map(|(rep, r)| (*rep, r)).collect();
    write_regret_csv(&p, &digest, &rows)?;
    outputs.committed = true;
    println!("wrote {}", p.display());
    Ok(EXIT_OK)
}

fn cmd_audit(path: &Path, k: usize, horizon: u64, config: Option<&Path>) -> CmdResult {
    let table = read_csv(path)?;
    if let Some(cfg_path) = config {
        let cfg = ExperimentConfig::load(cfg_path)?;
        let expected = cfg.digest();
        match &table.digest {
            Some(d) if *d == expected => {}
            Some(d) => eprintln!("warning: config digest mismatch (file {d}, config {expected})"),
            None => eprintln!("warning: file carries no config digest"),
        }
    }
    let rows = parse_rounds(&table)?;
    let report = replay_audit(&rows, k, horizon)?;
    print!("{report}");
    if report.passed() {
        println!("PASS");
        Ok(EXIT_OK)
    } else {
        let first = &report.violations[0];
        println!("FAIL: {} violations, first at t = {} ({})", report.violations.len(), first.t, first.check);
        Ok(EXIT_DOMAIN)
    }
}

fn cmd_sweep(args: &RunArgs) -> CmdResult {
    let cfg = load(args)?;
    if cfg.horizons.len() < 3 {
        return Err(Failure::Domain(format!(
            "need ≥ 3 horizons for a scaling fit, got {}",
            cfg.horizons.len()
        )));
    }
    if cfg.synthetic.is_none() {
        check_all(&cfg)?;
    }
    let digest = cfg.digest();
    let dir = out_dir(args, &cfg)?;
    let mut outputs = Outputs::new();

    let mut means = Vec::with_capacity(cfg.horizons.len());
    let mut errors = Vec::with_capacity(cfg.horizons.len());
    for &t in &cfg.horizons {
        let (m, se) = match cfg.synthetic {
            Some(s) => (s.coefficient * (t as f64).powf(s.exponent), 0.0),
            None => {
                let env = cfg.environment_for(t)?;
                let mc = monte_carlo(&cfg.policy, &env, t, cfg.reps, cfg.base_seed, RunOptions::default())?;
                (mc.mean, mc.std_error)
            }
        };
        println!("T = {t}: mean regret {m:.6} ± {se:.6}");
        means.push(m);
        errors.push(se);
    }

    let p = outputs.track(dir.join("scaling.csv"));
    write_scaling_csv(&p, &digest, &cfg.horizons, &means, &errors)?;
    let mut floored_means = means.clone();
    let floored = floor_regrets(&mut floored_means, REGRET_FLOOR);
    if !floored.is_empty() {
        eprintln!("warning: floored non-positive mean regret at grid indices {floored:?}");
    }
    let mut fit = fit_scaling(&cfg.horizons, &floored_means)?;
    // The log-T fit needs no logarithm of the regret, so it keeps the raw means.
    let log_t: Vec<f64> = cfg.horizons.iter().map(|&t| (t as f64).ln()).collect();
    fit.log_t = least_squares(&log_t, &means)?;
    fit.mean_regrets = means;
    fit.std_errors = Some(errors);
    let summary = FitSummary::new(&fit, &digest, floored);
    let fp = outputs.track(dir.join("fit.json"));
    write_fit_json(&fp, &summary)?;
    outputs.committed = true;
    println!(
        "log-log slope {:.6} (R² {:.4}); log-T fit R² {:.4}",
        summary.log_log_slope, summary.log_log_r_squared, summary.log_t_r_squared
    );
    println!("wrote {} and {}", p.display(), fp.display());
    Ok(EXIT_OK)
}
