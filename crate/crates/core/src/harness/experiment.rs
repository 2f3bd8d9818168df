use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Mode, ScheduleSpec, SweepConfig};
use super::fit::{fit_rate, RateFit};
use super::trace::{ensure_parent, median, ErrorTrace, TraceRow};
use crate::bounds::{theorem2_rhs, validate_stepsize_t2, StepsizeReport, Theorem2Inputs};
use crate::chain::{exploration_params, ExplorationParams};
use crate::error::{Error, Result};
use crate::mdp::{bellman, induced_chain, solve_qstar, BehaviorPolicy, MdpModel, QTable};
use crate::qlearning::{run_q_async, run_q_sync, QRun};
use crate::sa::StepSchedule;
use crate::seeding::replication_rng;

/// Accuracy of the `Q*` oracle.
pub const QSTAR_TOL: f64 = 1e-10;

/// Sidecar metadata of a trace file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceMeta {
    pub config: ExperimentConfig,
    pub sigma: f64,
    pub tau: u64,
    pub mu_min: f64,
    pub t_mix: u64,
    /// `||F(Q*) - Q*||_inf` of the oracle.
    pub qstar_residual: f64,
    /// High-probability bound at each checkpoint; `null` when no bound
    /// applies to the mode and schedule.
    pub bound_rhs: Option<Vec<f64>>,
    pub checkpoints: Vec<u64>,
    pub schedule: StepSchedule,
    pub stepsize_conditions: Option<StepsizeReport>,
    pub gamma: f64,
    pub r_bar: f64,
    pub n_pairs: u64,
    /// Largest `||Q(t)||_inf` and `|w(t)|` over all replications.
    pub max_abs_q: f64,
    pub max_abs_noise: f64,
}

impl TraceMeta {
    fn theorem2_inputs(&self, horizon: u64) -> Option<Theorem2Inputs> {
        let (h, t0) = self.schedule.rescaled_params()?;
        (self.config.mode == Mode::Async).then_some(Theorem2Inputs {
            r_bar: self.r_bar,
            gamma: self.gamma,
            mu_min: self.mu_min,
            t_mix: self.t_mix,
            h,
            t0,
            delta: self.config.delta,
            n_sa: self.n_pairs,
            horizon,
        })
    }

    /// The bound overlay recomputed from the metadata fields.
    pub fn recompute_bound_rhs(&self) -> Result<Option<Vec<f64>>> {
        if self.theorem2_inputs(1).is_none() {
            return Ok(None);
        }
        self.checkpoints
            .iter()
            .map(|&t| theorem2_rhs(&self.theorem2_inputs(t).expect("checked above")).map(|b| b.value))
            .collect::<Result<Vec<_>>>()
            .map(Some)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Everything shared by the replications of one MDP.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub mdp: MdpModel,
    pub policy: BehaviorPolicy,
    pub params: ExplorationParams,
    pub qstar: QTable,
    pub qstar_residual: f64,
    pub checkpoints: Vec<u64>,
}

impl Prepared {
    pub fn new(config: &ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let (mdp, policy) = config.mdp.resolve()?;
        let params = exploration_params(&induced_chain(&mdp, &policy)?)?;
        let qstar = solve_qstar(&mdp, QSTAR_TOL)?;
        let qstar_residual = bellman(&qstar, &mdp)?.distance(&qstar);
        Ok(Prepared {
            mdp,
            policy,
            params,
            qstar,
            qstar_residual,
            checkpoints: config.checkpoints.resolve(config.horizon)?,
        })
    }

    fn theorem2_inputs(&self, schedule: &StepSchedule, delta: f64) -> Option<Theorem2Inputs> {
        let (h, t0) = schedule.rescaled_params()?;
        Some(Theorem2Inputs {
            r_bar: self.mdp.r_bar(),
            gamma: self.mdp.gamma(),
            mu_min: self.params.mu_min,
            t_mix: self.params.t_mix,
            h,
            t0,
            delta,
            n_sa: self.mdp.n_pairs() as u64,
            horizon: 1,
        })
    }
}

/// Runs `f` on a pool of `workers` threads, or on the global pool.
pub fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match workers {
        None => Ok(f()),
        Some(0) => Err(Error::input("workers must be at least 1")),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map(|pool| pool.install(f))
            .map_err(|e| Error::input(format!("cannot start worker pool: {e}"))),
    }
}

fn run_one(prep: &Prepared, schedule: &StepSchedule, config: &ExperimentConfig, index: u64) -> Result<QRun> {
    let mut rng = replication_rng(config.base_seed, index);
    match config.mode {
        Mode::Async => run_q_async(
            &prep.mdp,
            &prep.policy,
            schedule,
            config.horizon,
            &prep.checkpoints,
            &prep.qstar,
            &mut rng,
        ),
        Mode::Sync => run_q_sync(&prep.mdp, schedule, config.horizon, &prep.checkpoints, &prep.qstar, &mut rng),
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub trace: ErrorTrace,
    pub meta: TraceMeta,
}

/// Runs all replications of `config` under an already resolved schedule.
pub fn run_with_schedule(
    config: &ExperimentConfig,
    prep: &Prepared,
    schedule: &StepSchedule,
    workers: Option<usize>,
) -> Result<ExperimentOutcome> {
    schedule.validate()?;
    let runs: Vec<Result<QRun>> = with_workers(workers, || {
        (0..config.replications)
            .into_par_iter()
            .map(|i| run_one(prep, schedule, config, i))
            .collect()
    })?;
    let mut rows = Vec::with_capacity(runs.len() * prep.checkpoints.len());
    let (mut max_abs_q, mut max_abs_noise) = (0.0f64, 0.0f64);
    for (index, run) in runs.into_iter().enumerate() {
        let run = run.map_err(|e| Error::Replication {
            index,
            source: Box::new(e),
        })?;
        max_abs_q = max_abs_q.max(run.max_abs_q);
        max_abs_noise = max_abs_noise.max(run.max_abs_noise);
        rows.extend(run.trace.iter().map(|p| TraceRow {
            replication: index as u64,
            t: p.t,
            error: p.error,
            alpha: p.alpha,
        }));
    }

    let t2 = prep.theorem2_inputs(schedule, config.delta);
    let bound_rhs = match (&t2, config.mode) {
        (Some(inputs), Mode::Async) => Some(
            prep.checkpoints
                .iter()
                .map(|&t| theorem2_rhs(&inputs.with_horizon(t)).map(|b| b.value))
                .collect::<Result<Vec<_>>>()?,
        ),
        _ => None,
    };
    let meta = TraceMeta {
        config: config.clone(),
        sigma: prep.params.sigma,
        tau: prep.params.tau,
        mu_min: prep.params.mu_min,
        t_mix: prep.params.t_mix,
        qstar_residual: prep.qstar_residual,
        bound_rhs,
        checkpoints: prep.checkpoints.clone(),
        schedule: *schedule,
        stepsize_conditions: t2.as_ref().map(validate_stepsize_t2),
        gamma: prep.mdp.gamma(),
        r_bar: prep.mdp.r_bar(),
        n_pairs: prep.mdp.n_pairs() as u64,
        max_abs_q,
        max_abs_noise,
    };
    Ok(ExperimentOutcome {
        trace: ErrorTrace { rows },
        meta,
    })
}

/// Resolves the MDP and schedule of `config` and runs every replication.
/// Nothing is written to disk.
pub fn run_experiment(config: &ExperimentConfig, workers: Option<usize>) -> Result<ExperimentOutcome> {
    let prep = Prepared::new(config)?;
    let schedule = config.schedule.resolve(&prep.params, prep.mdp.gamma())?;
    run_with_schedule(config, &prep, &schedule, workers)
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

/// Writes every `(path, bytes)` pair, removing the ones already written if
/// any write fails.
fn write_all(files: &[(PathBuf, Vec<u8>)]) -> Result<()> {
    for (i, (path, bytes)) in files.iter().enumerate() {
        let res = ensure_parent(path).and_then(|_| std::fs::write(path, bytes).map_err(|e| Error::io(path, e)));
        if let Err(e) = res {
            for (done, _) in &files[..i] {
                let _ = std::fs::remove_file(done);
            }
            return Err(e);
        }
    }
    Ok(())
}

/// Paths written for an experiment with output prefix `prefix`.
pub fn experiment_paths(prefix: &Path) -> (PathBuf, PathBuf) {
    (with_suffix(prefix, ".csv"), with_suffix(prefix, ".meta.json"))
}

/// Writes `<prefix>.csv` and `<prefix>.meta.json`.
pub fn write_experiment(outcome: &ExperimentOutcome, prefix: &Path) -> Result<(PathBuf, PathBuf)> {
    let (csv_path, meta_path) = experiment_paths(prefix);
    let mut meta = serde_json::to_vec_pretty(&outcome.meta)?;
    meta.push(b'\n');
    write_all(&[
        (csv_path.clone(), outcome.trace.to_csv_bytes()?),
        (meta_path.clone(), meta),
    ])?;
    Ok((csv_path, meta_path))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub index: usize,
    pub schedule: String,
    pub compliant: bool,
    pub final_median_error: f64,
    /// Fitted slope over the default window; empty when the fit is not possible.
    pub slope: Option<f64>,
    /// `final_median_error` divided by the smallest one in the table.
    pub ratio_to_best: f64,
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub rows: Vec<SweepRow>,
    pub runs: Vec<ExperimentOutcome>,
}

/// Runs the base experiment once per schedule, all on the same MDP and seeds.
pub fn sweep_stepsizes(config: &SweepConfig, workers: Option<usize>) -> Result<SweepOutcome> {
    config.validate()?;
    let prep = Prepared::new(&config.base)?;
    let mut runs = Vec::with_capacity(config.schedules.len());
    let mut rows = Vec::with_capacity(config.schedules.len());
    for (index, spec) in config.schedules.iter().enumerate() {
        let schedule = spec.resolve(&prep.params, prep.mdp.gamma())?;
        let base = ExperimentConfig {
            schedule: *spec,
            ..config.base.clone()
        };
        let outcome = run_with_schedule(&base, &prep, &schedule, workers)?;
        let compliant = matches!(spec, ScheduleSpec::TheoremCompliant(_))
            || outcome.meta.stepsize_conditions.as_ref().is_some_and(|r| r.passed);
        let slope = fit_rate(&outcome.trace, None, None).ok().map(|f: RateFit| f.slope);
        rows.push(SweepRow {
            index,
            schedule: schedule.label(),
            compliant,
            final_median_error: median(&mut outcome.trace.final_errors()),
            slope,
            ratio_to_best: f64::NAN,
        });
        runs.push(outcome);
    }
    let best = rows.iter().map(|r| r.final_median_error).fold(f64::INFINITY, f64::min);
    for row in &mut rows {
        row.ratio_to_best = row.final_median_error / best;
    }
    Ok(SweepOutcome { rows, runs })
}

impl SweepOutcome {
    pub fn table_csv_bytes(&self) -> Result<Vec<u8>> {
        let mut writer = csv::Writer::from_writer(Vec::new());
        for row in &self.rows {
            writer.serialize(row)?;
        }
        writer
            .into_inner()
            .map_err(|e| Error::Numeric(format!("csv buffer: {e}")))
    }
}

/// Writes `<prefix>.sweep.csv` plus `<prefix>.s<i>.csv` and
/// `<prefix>.s<i>.meta.json` for every schedule.
pub fn write_sweep(outcome: &SweepOutcome, prefix: &Path) -> Result<Vec<PathBuf>> {
    let mut files = vec![(with_suffix(prefix, ".sweep.csv"), outcome.table_csv_bytes()?)];
    for (i, run) in outcome.runs.iter().enumerate() {
        let (csv_path, meta_path) = experiment_paths(&with_suffix(prefix, &format!(".s{i}")));
        let mut meta = serde_json::to_vec_pretty(&run.meta)?;
        meta.push(b'\n');
        files.push((csv_path, run.trace.to_csv_bytes()?));
        files.push((meta_path, meta));
    }
    write_all(&files)?;
    Ok(files.into_iter().map(|(p, _)| p).collect())
}
