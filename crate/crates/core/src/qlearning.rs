//! Tabular Q-learning on a single behavior trajectory, plus a synchronous
//! variant that draws one fresh transition per pair each round.
//!
//! Both runners check `||Q(t)||_inf <= r_bar / (1 - gamma)` and
//! `|w(t)| <= 2 r_bar / (1 - gamma)` at every step and abort with an
//! invariant error on violation.

use rand::Rng;

use crate::error::{check_finite, Error, Result};
use crate::mdp::{
    expect_next, row_maxima, sample_next_state, sample_reward, sample_start, sample_step,
    BehaviorPolicy, MdpModel, QTable,
};
use crate::sa::{validate_checkpoints, StepSchedule, TracePoint};

/// Absolute slack on the per-step safety checks.
pub const SAFETY_TOL: f64 = 1e-12;

/// `(x_bar, w_bar) = (r_bar / (1 - gamma), 2 r_bar / (1 - gamma))`.
pub fn q_safety_bounds(r_bar: f64, gamma: f64) -> Result<(f64, f64)> {
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::input(format!("gamma must be in [0, 1), got {gamma}")));
    }
    if !(r_bar >= 0.0) {
        return Err(Error::input(format!("r_bar must be non-negative, got {r_bar}")));
    }
    let x_bar = r_bar / (1.0 - gamma);
    Ok((x_bar, 2.0 * x_bar))
}

fn check_pair(q: &QTable, s: usize, a: usize) -> Result<()> {
    if s >= q.n_states() || a >= q.n_actions() {
        return Err(Error::Index(format!(
            "pair ({s}, {a}) outside a {}x{} table",
            q.n_states(),
            q.n_actions()
        )));
    }
    Ok(())
}

/// `Q(s, a) <- (1 - alpha) Q(s, a) + alpha (r + gamma max_a' Q(s_next, a'))`.
pub fn q_async_step(
    q: &mut QTable,
    s: usize,
    a: usize,
    reward: f64,
    s_next: usize,
    alpha: f64,
    gamma: f64,
) -> Result<()> {
    check_pair(q, s, a)?;
    check_pair(q, s_next, 0)?;
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::Schedule(format!("step size {alpha} outside (0, 1]")));
    }
    check_finite("reward", reward)?;
    let target = reward + gamma * q.row_max(s_next);
    let updated = (1.0 - alpha) * q.get(s, a) + alpha * target;
    q.set(s, a, check_finite("Q(s, a)", updated)?);
    Ok(())
}

/// `w = (r - r(s, a)) + gamma (max_a' Q(s_next, a') - E_{s'} max_a' Q(s', a'))`.
///
/// Needs the model, so it is a diagnostic only.
pub fn q_noise(q: &QTable, mdp: &MdpModel, s: usize, a: usize, reward: f64, s_next: usize) -> Result<f64> {
    q.check_matches(mdp)?;
    check_pair(q, s, a)?;
    check_pair(q, s_next, 0)?;
    let v = row_maxima(q);
    Ok(noise_from_maxima(mdp, &v, s, a, reward, s_next))
}

fn noise_from_maxima(mdp: &MdpModel, v: &[f64], s: usize, a: usize, reward: f64, s_next: usize) -> f64 {
    (reward - mdp.mean_reward(s, a)) + mdp.gamma() * (v[s_next] - expect_next(mdp, s, a, v))
}

/// Outcome of one Q-learning run.
#[derive(Debug, Clone)]
pub struct QRun {
    /// `||Q(t) - Q*||_inf` at each checkpoint.
    pub trace: Vec<TracePoint>,
    pub q: QTable,
    /// Largest `||Q(t)||_inf` seen.
    pub max_abs_q: f64,
    /// Largest `|w(t)|` seen.
    pub max_abs_noise: f64,
}

struct Monitor {
    x_bar: f64,
    w_bar: f64,
    max_abs_q: f64,
    max_abs_noise: f64,
}

impl Monitor {
    fn new(mdp: &MdpModel) -> Result<Self> {
        let (x_bar, w_bar) = q_safety_bounds(mdp.r_bar(), mdp.gamma())?;
        Ok(Monitor {
            x_bar,
            w_bar,
            max_abs_q: 0.0,
            max_abs_noise: 0.0,
        })
    }

    fn noise(&mut self, step: u64, w: f64) -> Result<()> {
        self.max_abs_noise = self.max_abs_noise.max(w.abs());
        if w.abs() > self.w_bar + SAFETY_TOL {
            return Err(Error::Invariant {
                step,
                detail: format!("|w| = {} exceeds 2 r_bar / (1 - gamma) = {}", w.abs(), self.w_bar),
            });
        }
        Ok(())
    }

    fn entry(&mut self, step: u64, value: f64) -> Result<()> {
        self.max_abs_q = self.max_abs_q.max(value.abs());
        if value.abs() > self.x_bar + SAFETY_TOL {
            return Err(Error::Invariant {
                step,
                detail: format!("|Q| = {} exceeds r_bar / (1 - gamma) = {}", value.abs(), self.x_bar),
            });
        }
        Ok(())
    }
}

fn prepare(mdp: &MdpModel, schedule: &StepSchedule, horizon: u64, checkpoints: &[u64], qstar: &QTable) -> Result<()> {
    schedule.validate()?;
    validate_checkpoints(checkpoints, horizon)?;
    qstar.check_matches(mdp)
}

/// Asynchronous Q-learning from `Q(0) = 0` along one behavior trajectory.
pub fn run_q_async<R: Rng + ?Sized>(
    mdp: &MdpModel,
    policy: &BehaviorPolicy,
    schedule: &StepSchedule,
    horizon: u64,
    checkpoints: &[u64],
    qstar: &QTable,
    rng: &mut R,
) -> Result<QRun> {
    prepare(mdp, schedule, horizon, checkpoints, qstar)?;
    let gamma = mdp.gamma();
    let n_a = mdp.n_actions();
    let mut monitor = Monitor::new(mdp)?;
    let mut q = QTable::for_mdp(mdp);
    let mut v = row_maxima(&q);
    let mut visits = vec![0u64; mdp.n_pairs()];
    let mut trace = Vec::with_capacity(checkpoints.len());
    let mut next_cp = checkpoints.iter().copied().peekable();

    let (mut s, mut a) = sample_start(mdp, policy, rng)?;
    for t in 0..horizon {
        let step = sample_step(mdp, policy, s, a, rng)?;
        let pair = s * n_a + a;
        let alpha = schedule.step_size_at(t, visits[pair]);
        monitor.noise(t, noise_from_maxima(mdp, &v, s, a, step.reward, step.next_state))?;

        let target = step.reward + gamma * v[step.next_state];
        let updated = (1.0 - alpha) * q.get(s, a) + alpha * target;
        check_finite("Q(s, a)", updated)?;
        q.set(s, a, updated);
        monitor.entry(t + 1, updated)?;
        v[s] = q.row_max(s);
        visits[pair] += 1;

        if next_cp.peek() == Some(&(t + 1)) {
            next_cp.next();
            trace.push(TracePoint {
                t: t + 1,
                error: q.distance(qstar),
                alpha,
            });
        }
        s = step.next_state;
        a = step.next_action;
    }
    Ok(QRun {
        trace,
        q,
        max_abs_q: monitor.max_abs_q,
        max_abs_noise: monitor.max_abs_noise,
    })
}

/// Synchronous Q-learning: every pair is updated each round from its own
/// fresh reward and next-state draw, all against `Q(t)`.
pub fn run_q_sync<R: Rng + ?Sized>(
    mdp: &MdpModel,
    schedule: &StepSchedule,
    horizon: u64,
    checkpoints: &[u64],
    qstar: &QTable,
    rng: &mut R,
) -> Result<QRun> {
    prepare(mdp, schedule, horizon, checkpoints, qstar)?;
    let gamma = mdp.gamma();
    let (n_s, n_a) = (mdp.n_states(), mdp.n_actions());
    let mut monitor = Monitor::new(mdp)?;
    let mut q = QTable::for_mdp(mdp);
    let mut targets = vec![0.0; mdp.n_pairs()];
    let mut trace = Vec::with_capacity(checkpoints.len());
    let mut next_cp = checkpoints.iter().copied().peekable();

    for t in 0..horizon {
        // Every pair has been visited t times before this round.
        let alpha = schedule.step_size_at(t, t);
        let v = row_maxima(&q);
        for s in 0..n_s {
            for a in 0..n_a {
                let reward = sample_reward(mdp, s, a, rng);
                let s_next = sample_next_state(mdp, s, a, rng);
                monitor.noise(t, noise_from_maxima(mdp, &v, s, a, reward, s_next))?;
                targets[s * n_a + a] = reward + gamma * v[s_next];
            }
        }
        for s in 0..n_s {
            for a in 0..n_a {
                let updated = (1.0 - alpha) * q.get(s, a) + alpha * targets[s * n_a + a];
                check_finite("Q(s, a)", updated)?;
                q.set(s, a, updated);
                monitor.entry(t + 1, updated)?;
            }
        }
        if next_cp.peek() == Some(&(t + 1)) {
            next_cp.next();
            trace.push(TracePoint {
                t: t + 1,
                error: q.distance(qstar),
                alpha,
            });
        }
    }
    Ok(QRun {
        trace,
        q,
        max_abs_q: monitor.max_abs_q,
        max_abs_noise: monitor.max_abs_noise,
    })
}
