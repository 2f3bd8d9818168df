use std::path::{Path, PathBuf};
use std::process::ExitCode;

use asyncq::bounds::{
    lemma3_check, lemma7_check, lemma7_random, sample_complexity_t2, shifted_azuma_mc, theorem1_rhs,
    theorem2_rhs, Lemma7Params, ProcessSpec, Theorem1Inputs, Theorem2Inputs,
};
use asyncq::chain::{exploration_check, exploration_params_from, mixing_time, stationary_distribution, STATIONARY_TOL};
use asyncq::harness::{
    fit_rate, run_experiment, sweep_stepsizes, with_workers, write_experiment, write_sweep, ErrorTrace,
    ExperimentConfig, SweepConfig,
};
use asyncq::mdp::{bellman, induced_chain, load_mdp, solve_qstar};
use asyncq::{Error, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value};

/// Asynchronous Q-learning experiments, error bounds and numeric verifiers.
#[derive(Debug, Parser)]
#[command(name = "asyncq", version)]
struct Cli {
    /// Overrides the base seed of `run`/`sweep` and seeds the Monte Carlo verifiers.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for replications and Monte Carlo trials.
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// Output prefix for `run`/`sweep`; output file for the other commands.
    #[arg(long, global = true)]
    output: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Optimal action values of an MDP file.
    Solve { mdp: PathBuf },
    /// Stationary distribution, mixing time and exploration constants of
    /// the state-action chain induced by the file's behavior policy.
    Chain { mdp: PathBuf },
    /// Runs an experiment config and writes `<prefix>.csv` and `<prefix>.meta.json`.
    Run { config: PathBuf },
    /// Evaluates a bound from `--name=value` parameters.
    Bound {
        which: Theorem,
        /// For t2: also report the smallest T with bound <= epsilon.
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(trailing_var_arg = true, allow_hyphen_values = true, value_name = "--NAME=VALUE")]
        params: Vec<String>,
    },
    /// Log-log rate of the median error in a trace file.
    Rate {
        trace: PathBuf,
        #[arg(long)]
        t_min: Option<u64>,
        #[arg(long)]
        t_max: Option<u64>,
    },
    /// Runs a base experiment under several schedules.
    Sweep { config: PathBuf },
    /// Numeric checks of the step-size and concentration lemmas.
    Verify {
        #[command(subcommand)]
        target: VerifyTarget,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Theorem {
    T1,
    T2,
}

#[derive(Debug, Subcommand)]
enum VerifyTarget {
    Lemma3(Lemma3Args),
    Lemma7(Lemma7Args),
    Azuma(AzumaArgs),
}

#[derive(Debug, Args)]
struct Lemma3Args {
    /// Run the full parameter grid instead of a single point.
    #[arg(long)]
    grid: bool,
    #[arg(long, default_value_t = 16.0)]
    h: f64,
    #[arg(long, default_value_t = 64.0)]
    t0: f64,
    #[arg(long, default_value_t = 0.25)]
    sigma: f64,
    #[arg(long, default_value_t = 2)]
    tau: u64,
    #[arg(long, value_delimiter = ',', default_values_t = [100u64, 1000, 10000])]
    t: Vec<u64>,
}

#[derive(Debug, Args)]
struct Lemma7Args {
    #[arg(long)]
    grid: bool,
    #[arg(long, default_value_t = 16.0)]
    h: f64,
    #[arg(long, default_value_t = 64.0)]
    t0: f64,
    #[arg(long, default_value_t = 0.25)]
    sigma: f64,
    /// Defaults to the largest value meeting the preconditions with 10% slack.
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long, default_value_t = 2)]
    tau: u64,
    #[arg(long, default_value_t = 1000)]
    t: u64,
    #[arg(long, default_value_t = 1.0)]
    omega: f64,
    /// Random d sequences per parameter set.
    #[arg(long, default_value_t = 1000)]
    sequences: usize,
}

#[derive(Debug, Args)]
struct AzumaArgs {
    /// All built-in processes for tau in {1, 2, 5}.
    #[arg(long)]
    grid: bool,
    #[arg(long, default_value_t = 1)]
    tau: u64,
    #[arg(long, value_enum, default_value_t = Process::IidRademacher)]
    process: Process,
    #[arg(long, default_value_t = 1000)]
    t: u64,
    #[arg(long, default_value_t = 0.05)]
    delta: f64,
    #[arg(long, default_value_t = 10_000)]
    trials: u64,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Process {
    Zero,
    IidRademacher,
    InterleavedStreams,
    BlockRevelation,
}

impl From<Process> for ProcessSpec {
    fn from(p: Process) -> Self {
        match p {
            Process::Zero => ProcessSpec::Zero,
            Process::IidRademacher => ProcessSpec::IidRademacher,
            Process::InterleavedStreams => ProcessSpec::InterleavedStreams,
            Process::BlockRevelation => ProcessSpec::BlockRevelation,
        }
    }
}

/// What a command produced: a JSON document and whether the checks it ran held.
struct Report {
    body: Value,
    status: Status,
}

enum Status {
    Ok,
    /// Inputs outside a lemma's hypotheses.
    Unmet,
    /// A checked inequality failed.
    Violated,
}

impl Report {
    fn ok(body: Value) -> Self {
        Report { body, status: Status::Ok }
    }
}

fn solve(path: &Path) -> Result<Report> {
    let (mdp, _) = load_mdp(path)?;
    let q = solve_qstar(&mdp, 1e-10)?;
    let residual = bellman(&q, &mdp)?.distance(&q);
    let values: Vec<f64> = (0..mdp.n_states()).map(|s| q.row_max(s)).collect();
    let greedy: Vec<usize> = (0..mdp.n_states()).map(|s| q.greedy_action(s)).collect();
    Ok(Report::ok(json!({
        "qstar": q.to_rows(),
        "values": values,
        "greedy_policy": greedy,
        "residual": residual,
    })))
}

fn chain(path: &Path) -> Result<Report> {
    let (mdp, policy) = load_mdp(path)?;
    let chain = induced_chain(&mdp, &policy)?;
    let mu = stationary_distribution(&chain, STATIONARY_TOL)?;
    let params = exploration_params_from(&chain, &mu)?;
    let check = exploration_check(&chain, params.sigma, params.tau)?;
    Ok(Report::ok(json!({
        "stationary": mu,
        "mu_min": params.mu_min,
        "t_mix": mixing_time(&chain, &mu)?,
        "sigma": params.sigma,
        "tau": params.tau,
        "irreducible": chain.is_irreducible(),
        "exploration_check": check,
    })))
}

fn run(cli: &Cli, path: &Path) -> Result<Report> {
    let mut config = ExperimentConfig::load(path)?;
    if let Some(seed) = cli.seed {
        config.base_seed = seed;
    }
    let prefix = output_prefix(cli.output.as_deref(), config.output.as_deref(), path);
    let outcome = run_experiment(&config, cli.workers)?;
    let (csv, meta) = write_experiment(&outcome, &prefix)?;
    let finals = outcome.trace.final_errors();
    let mut sorted = finals.clone();
    sorted.sort_by(f64::total_cmp);
    Ok(Report::ok(json!({
        "trace": csv,
        "meta": meta,
        "replications": finals.len(),
        "median_final_error": sorted[sorted.len() / 2],
        "final_bound": outcome.meta.bound_rhs.as_ref().and_then(|b| b.last()),
        "sigma": outcome.meta.sigma,
        "tau": outcome.meta.tau,
    })))
}

fn sweep(cli: &Cli, path: &Path) -> Result<Report> {
    let mut config = SweepConfig::load(path)?;
    if let Some(seed) = cli.seed {
        config.base.base_seed = seed;
    }
    let prefix = output_prefix(cli.output.as_deref(), config.base.output.as_deref(), path);
    let outcome = sweep_stepsizes(&config, cli.workers)?;
    let files = write_sweep(&outcome, &prefix)?;
    Ok(Report::ok(json!({ "table": outcome.rows, "files": files })))
}

/// `--output`, else the config's `output`, else the config file name
/// without extension in the working directory.
fn output_prefix(flag: Option<&Path>, config: Option<&Path>, config_path: &Path) -> PathBuf {
    flag.or(config).map(Path::to_path_buf).unwrap_or_else(|| {
        PathBuf::from(config_path.file_stem().unwrap_or_else(|| "experiment".as_ref()))
    })
}

/// Parses `--name=value` (or `name=value`) pairs into a JSON object.
/// Integral values become JSON integers.
fn parse_params(params: &[String]) -> Result<Map<String, Value>> {
    let mut map = Map::new();
    for raw in params {
        let body = raw.trim_start_matches('-');
        let (name, value) = body
            .split_once('=')
            .ok_or_else(|| Error::Input(format!("expected --name=value, got `{raw}`")))?;
        let x: f64 = value
            .parse()
            .map_err(|_| Error::Input(format!("parameter {name}: `{value}` is not a number")))?;
        let v = if x.fract() == 0.0 && x >= 0.0 && x < u64::MAX as f64 {
            json!(x as u64)
        } else {
            json!(x)
        };
        if map.insert(name.to_string(), v).is_some() {
            return Err(Error::Input(format!("parameter {name} given twice")));
        }
    }
    Ok(map)
}

fn inputs<T: serde::de::DeserializeOwned>(map: Map<String, Value>) -> Result<T> {
    serde_json::from_value(Value::Object(map)).map_err(|e| Error::Input(format!("bound parameters: {e}")))
}

fn bound(which: Theorem, epsilon: Option<f64>, params: &[String]) -> Result<Report> {
    let mut map = parse_params(params)?;
    match which {
        Theorem::T1 => {
            if epsilon.is_some() {
                return Err(Error::Input("--epsilon applies to t2 only".into()));
            }
            let inp: Theorem1Inputs = inputs(map)?;
            let b = theorem1_rhs(&inp)?;
            Ok(Report::ok(json!({ "inputs": inp, "bound": b, "eps_bar": inp.eps_bar() })))
        }
        Theorem::T2 => {
            // Without T, the bound is reported at the sample-complexity horizon.
            let horizon_given = map.contains_key("T");
            if epsilon.is_some() && !horizon_given {
                map.insert("T".into(), json!(1));
            }
            let mut inp: Theorem2Inputs = inputs(map)?;
            let complexity = epsilon.map(|eps| sample_complexity_t2(&inp, eps)).transpose()?;
            if let (Some(c), false) = (&complexity, horizon_given) {
                inp = inp.with_horizon(c.horizon);
            }
            let b = theorem2_rhs(&inp)?;
            let mut body = json!({ "inputs": inp, "tau": inp.tau(), "bound": b });
            if let Some(c) = complexity {
                body["sample_complexity"] = json!(c);
            }
            Ok(Report::ok(body))
        }
    }
}

fn rate(path: &Path, t_min: Option<u64>, t_max: Option<u64>) -> Result<Report> {
    let trace = ErrorTrace::read_csv(path)?;
    let fit = fit_rate(&trace, t_min, t_max)?;
    Ok(Report::ok(json!(fit)))
}

fn status_of(unmet: bool, holds: bool) -> Status {
    if unmet {
        Status::Unmet
    } else if holds {
        Status::Ok
    } else {
        Status::Violated
    }
}

const GRID_SIGMA: [f64; 2] = [0.1, 0.25];
const GRID_H_TIMES_SIGMA: [f64; 3] = [2.5, 4.0, 8.0];
const GRID_TAU: [u64; 3] = [1, 4, 16];
const GRID_T: [u64; 3] = [100, 1000, 10_000];

fn grid() -> impl Iterator<Item = (f64, f64, u64, f64)> {
    GRID_SIGMA.into_iter().flat_map(|sigma| {
        GRID_H_TIMES_SIGMA.into_iter().flat_map(move |m| {
            let h = m / sigma;
            GRID_TAU.into_iter().map(move |tau| (sigma, h, tau, (4.0 * h).max(tau as f64)))
        })
    })
}

/// `gamma` with `sigma h (1 - sqrt(gamma)) = 1.1`.
fn slack_gamma(sigma: f64, h: f64) -> f64 {
    let root = 1.0 - 1.1 / (sigma * h);
    root * root
}

fn verify(cli: &Cli, target: &VerifyTarget) -> Result<Report> {
    let seed = cli.seed.unwrap_or(0);
    match target {
        VerifyTarget::Lemma3(a) => {
            if !a.grid {
                let r = lemma3_check(a.h, a.t0, a.sigma, a.tau, &a.t)?;
                let status = status_of(!r.preconditions_met, r.holds);
                return Ok(Report { body: json!(r), status });
            }
            let mut reports = Vec::new();
            let (mut unmet, mut holds) = (false, true);
            for (sigma, h, tau, t0) in grid() {
                let r = lemma3_check(h, t0, sigma, tau, &GRID_T)?;
                unmet |= !r.preconditions_met;
                holds &= r.holds;
                reports.push(json!({ "sigma": sigma, "h": h, "tau": tau, "t0": t0, "report": r }));
            }
            Ok(Report { body: json!(reports), status: status_of(unmet, holds) })
        }
        VerifyTarget::Lemma7(a) => with_workers(cli.workers, || {
            let points: Vec<Lemma7Params> = if a.grid {
                grid()
                    .flat_map(|(sigma, h, tau, t0)| {
                        GRID_T.into_iter().flat_map(move |t| {
                            [0.5, 1.0].into_iter().map(move |omega| Lemma7Params {
                                h,
                                t0,
                                sigma,
                                gamma: slack_gamma(sigma, h),
                                tau,
                                t,
                                omega,
                            })
                        })
                    })
                    .collect()
            } else {
                vec![Lemma7Params {
                    h: a.h,
                    t0: a.t0,
                    sigma: a.sigma,
                    gamma: a.gamma.unwrap_or_else(|| slack_gamma(a.sigma, a.h)),
                    tau: a.tau,
                    t: a.t,
                    omega: a.omega,
                }]
            };
            let mut reports = Vec::new();
            let (mut unmet, mut holds) = (false, true);
            for (i, p) in points.iter().enumerate() {
                let random = lemma7_random(p, a.sequences, seed.wrapping_add(i as u64))?;
                let constant = lemma7_check(p, &[vec![p.sigma; p.t as usize + 1]])?;
                unmet |= !random.preconditions_met;
                holds &= random.holds && constant.holds;
                reports.push(json!({ "params": p, "random": random, "constant_sigma": constant }));
            }
            Ok(Report { body: json!(reports), status: status_of(unmet, holds) })
        })?,
        VerifyTarget::Azuma(a) => with_workers(cli.workers, || {
            let cases: Vec<(u64, ProcessSpec)> = if a.grid {
                [1u64, 2, 5]
                    .into_iter()
                    .flat_map(|tau| ProcessSpec::ALL.into_iter().map(move |p| (tau, p)))
                    .collect()
            } else {
                vec![(a.tau, a.process.into())]
            };
            let mut reports = Vec::new();
            let mut holds = true;
            for (i, (tau, process)) in cases.into_iter().enumerate() {
                let r = shifted_azuma_mc(tau, process, a.t, a.delta, a.trials, seed.wrapping_add(i as u64))?;
                holds &= r.holds;
                reports.push(r);
            }
            Ok(Report { body: json!(reports), status: status_of(false, holds) })
        })?,
    }
}

fn execute(cli: &Cli) -> Result<Report> {
    match &cli.command {
        Command::Solve { mdp } => solve(mdp),
        Command::Chain { mdp } => chain(mdp),
        Command::Run { config } => run(cli, config),
        Command::Bound { which, epsilon, params } => bound(*which, *epsilon, params),
        Command::Rate { trace, t_min, t_max } => rate(trace, *t_min, *t_max),
        Command::Sweep { config } => sweep(cli, config),
        Command::Verify { target } => verify(cli, target),
    }
}

fn emit(cli: &Cli, body: &Value) -> Result<()> {
    let text = serde_json::to_string_pretty(body)? + "\n";
    let to_file = !matches!(cli.command, Command::Run { .. } | Command::Sweep { .. });
    match (&cli.output, to_file) {
        (Some(path), true) => std::fs::write(path, text).map_err(|e| Error::Io { path: path.clone(), source: e }),
        _ => {
            print!("{text}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = execute(&cli).and_then(|report| {
        emit(&cli, &report.body)?;
        Ok(report.status)
    });
    match result {
        Ok(Status::Ok) => ExitCode::SUCCESS,
        Ok(Status::Unmet) => {
            eprintln!("error: preconditions unmet");
            ExitCode::from(2)
        }
        Ok(Status::Violated) => {
            eprintln!("error: inequality violated");
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
