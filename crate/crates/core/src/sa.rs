//! Asynchronous stochastic approximation
//!
//! ```text
//! x_i(t+1) = x_i(t) + alpha_t (F_i(x(t)) - x_i(t) + w(t))   for i = i_t
//! x_i(t+1) = x_i(t)                                          otherwise
//! ```
//!
//! started from `x(0) = 0`, for any operator, visitation process and bounded
//! noise source.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::chain::MarkovChain;
use crate::error::{check_finite, Error, Result};
use crate::mdp::sample_categorical;
use crate::norms::{weighted_distance, weighted_norm, Operator, WeightVector};

/// Slack absorbed by runtime bound assertions.
pub const BOUND_ASSERT_TOL: f64 = 1e-9;

/// Step-size rule `alpha_t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StepSchedule {
    /// `h / (t + t0)`.
    RescaledLinear { h: f64, t0: f64 },
    /// `1 / (t + 1)^omega`.
    Polynomial { omega: f64 },
    /// `1 / (t + 1)`.
    Linear,
    Constant { alpha: f64 },
    /// `h / (N_i(t) + t0)` with `N_i(t)` the number of earlier visits to `i`.
    PerCoordinate { h: f64, t0: f64 },
}

impl StepSchedule {
    pub fn rescaled_linear(h: f64, t0: f64) -> Result<Self> {
        StepSchedule::RescaledLinear { h, t0 }.validated()
    }

    /// Rescaled-linear schedule required to satisfy `t0 >= max(4h, tau)`.
    pub fn rescaled_linear_compliant(h: f64, t0: f64, tau: u64) -> Result<Self> {
        let need = (4.0 * h).max(tau as f64);
        if t0 < need {
            return Err(Error::Schedule(format!(
                "t0 = {t0} is below max(4h, tau) = {need}"
            )));
        }
        StepSchedule::rescaled_linear(h, t0)
    }

    /// `h = 2 / (sigma (1 - gamma))`, `t0 = max(4h, tau)`.
    pub fn theorem_compliant(sigma: f64, gamma: f64, tau: u64) -> Result<Self> {
        StepSchedule::theorem_compliant_scaled(sigma, gamma, tau, 1.0)
    }

    /// As [`StepSchedule::theorem_compliant`] with `h` multiplied by `scale`.
    pub fn theorem_compliant_scaled(sigma: f64, gamma: f64, tau: u64, scale: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma < 1.0) || !(0.0..1.0).contains(&gamma) {
            return Err(Error::Schedule(format!(
                "need sigma in (0, 1) and gamma in [0, 1), got sigma = {sigma}, gamma = {gamma}"
            )));
        }
        let h = scale * 2.0 / (sigma * (1.0 - gamma));
        StepSchedule::rescaled_linear_compliant(h, (4.0 * h).max(tau as f64), tau)
    }

    /// Checks that every produced step lies in `(0, 1]`.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Schedule(msg));
        match *self {
            StepSchedule::RescaledLinear { h, t0 } | StepSchedule::PerCoordinate { h, t0 } => {
                if !(h > 0.0 && h.is_finite()) {
                    return bad(format!("h must be positive, got {h}"));
                }
                if !(t0 >= 0.0 && t0.is_finite()) {
                    return bad(format!("t0 must be non-negative, got {t0}"));
                }
                if h > t0 {
                    return bad(format!("first step h / t0 = {h} / {t0} exceeds 1"));
                }
            }
            StepSchedule::Polynomial { omega } => {
                if !(omega > 0.0 && omega <= 1.0) {
                    return bad(format!("omega must be in (0, 1], got {omega}"));
                }
            }
            StepSchedule::Linear => {}
            StepSchedule::Constant { alpha } => {
                if !(alpha > 0.0 && alpha <= 1.0) {
                    return bad(format!("constant step must be in (0, 1], got {alpha}"));
                }
            }
        }
        Ok(())
    }

    fn validated(self) -> Result<Self> {
        self.validate()?;
        Ok(self)
    }

    /// `alpha_t`; `visit_count` is only used by the per-coordinate rule.
    pub fn step_size_at(&self, t: u64, visit_count: u64) -> f64 {
        match *self {
            StepSchedule::RescaledLinear { h, t0 } => h / (t as f64 + t0),
            StepSchedule::Polynomial { omega } => (t as f64 + 1.0).powf(-omega),
            StepSchedule::Linear => 1.0 / (t as f64 + 1.0),
            StepSchedule::Constant { alpha } => alpha,
            StepSchedule::PerCoordinate { h, t0 } => h / (visit_count as f64 + t0),
        }
    }

    /// `(h, t0)` for the rescaled-linear rule.
    pub fn rescaled_params(&self) -> Option<(f64, f64)> {
        match *self {
            StepSchedule::RescaledLinear { h, t0 } => Some((h, t0)),
            _ => None,
        }
    }

    pub fn label(&self) -> String {
        match *self {
            StepSchedule::RescaledLinear { h, t0 } => format!("rescaled_linear(h={h},t0={t0})"),
            StepSchedule::Polynomial { omega } => format!("polynomial(omega={omega})"),
            StepSchedule::Linear => "linear".to_string(),
            StepSchedule::Constant { alpha } => format!("constant(alpha={alpha})"),
            StepSchedule::PerCoordinate { h, t0 } => format!("per_coordinate(h={h},t0={t0})"),
        }
    }
}

/// Iterate `x(t)` with its step counter and per-coordinate visit counts.
#[derive(Debug, Clone, PartialEq)]
pub struct SaState {
    pub x: Vec<f64>,
    pub t: u64,
    pub visit_counts: Vec<u64>,
}

impl SaState {
    /// `x(0) = 0`.
    pub fn new(n: usize) -> Self {
        SaState {
            x: vec![0.0; n],
            t: 0,
            visit_counts: vec![0; n],
        }
    }

    /// Applies one asynchronous update to coordinate `i`.
    pub fn sa_step(&mut self, i: usize, f_i: f64, w: f64, alpha: f64) -> Result<()> {
        if i >= self.x.len() {
            return Err(Error::Index(format!("coordinate {i} out of range {}", self.x.len())));
        }
        check_finite("F_i(x)", f_i)?;
        check_finite("noise", w)?;
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::Schedule(format!("step size {alpha} outside (0, 1]")));
        }
        let xi = self.x[i];
        self.x[i] = check_finite("x_i", xi + alpha * (f_i - xi + w))?;
        self.t += 1;
        self.visit_counts[i] += 1;
        Ok(())
    }
}

/// Source of the visited coordinate `i_t`.
pub trait VisitSource {
    fn dim(&self) -> usize;

    fn next_visit<R: Rng + ?Sized>(&mut self, rng: &mut R) -> usize;
}

/// `i_t` follows a Markov chain started at a fixed index.
#[derive(Debug, Clone)]
pub struct MarkovVisits {
    chain: MarkovChain,
    current: usize,
    started: bool,
}

impl MarkovVisits {
    pub fn new(chain: MarkovChain, start: usize) -> Result<Self> {
        if start >= chain.len() {
            return Err(Error::Index(format!("start {start} outside chain of size {}", chain.len())));
        }
        Ok(MarkovVisits {
            chain,
            current: start,
            started: false,
        })
    }
}

impl VisitSource for MarkovVisits {
    fn dim(&self) -> usize {
        self.chain.len()
    }

    fn next_visit<R: Rng + ?Sized>(&mut self, rng: &mut R) -> usize {
        if self.started {
            self.current = sample_categorical(self.chain.transition().row(self.current), rng);
        }
        self.started = true;
        self.current
    }
}

/// `i_t` i.i.d. from a fixed distribution.
#[derive(Debug, Clone)]
pub struct IidVisits {
    probs: Vec<f64>,
}

impl IidVisits {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        let sum: f64 = probs.iter().sum();
        if probs.is_empty() || probs.iter().any(|p| !(0.0..=1.0).contains(p)) || (sum - 1.0).abs() > 1e-12 {
            return Err(Error::input("visit distribution must be a probability vector"));
        }
        Ok(IidVisits { probs })
    }

    pub fn uniform(n: usize) -> Self {
        IidVisits {
            probs: vec![1.0 / n as f64; n],
        }
    }
}

impl VisitSource for IidVisits {
    fn dim(&self) -> usize {
        self.probs.len()
    }

    fn next_visit<R: Rng + ?Sized>(&mut self, rng: &mut R) -> usize {
        sample_categorical(&self.probs, rng)
    }
}

/// `i_t = t mod n`.
#[derive(Debug, Clone)]
pub struct RoundRobin {
    n: usize,
    next: usize,
}

impl RoundRobin {
    pub fn new(n: usize) -> Self {
        RoundRobin { n, next: 0 }
    }
}

impl VisitSource for RoundRobin {
    fn dim(&self) -> usize {
        self.n
    }

    fn next_visit<R: Rng + ?Sized>(&mut self, _rng: &mut R) -> usize {
        let i = self.next;
        self.next = (self.next + 1) % self.n;
        i
    }
}

/// Zero-mean bounded noise `w(t)`.
pub trait NoiseSource {
    /// Almost-sure bound `w_bar` on `|w(t)|`.
    fn bound(&self) -> f64;

    fn sample<R: Rng + ?Sized>(&mut self, coordinate: usize, rng: &mut R) -> f64;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroNoise;

impl NoiseSource for ZeroNoise {
    fn bound(&self) -> f64 {
        0.0
    }

    fn sample<R: Rng + ?Sized>(&mut self, _coordinate: usize, _rng: &mut R) -> f64 {
        0.0
    }
}

/// Uniform on `[-half_width, half_width]`.
#[derive(Debug, Clone, Copy)]
pub struct UniformNoise {
    pub half_width: f64,
}

impl NoiseSource for UniformNoise {
    fn bound(&self) -> f64 {
        self.half_width
    }

    fn sample<R: Rng + ?Sized>(&mut self, _coordinate: usize, rng: &mut R) -> f64 {
        self.half_width * (2.0 * rng.gen::<f64>() - 1.0)
    }
}

/// `+-scale` with equal probability.
#[derive(Debug, Clone, Copy)]
pub struct RademacherNoise {
    pub scale: f64,
}

impl NoiseSource for RademacherNoise {
    fn bound(&self) -> f64 {
        self.scale
    }

    fn sample<R: Rng + ?Sized>(&mut self, _coordinate: usize, rng: &mut R) -> f64 {
        if rng.gen::<bool>() {
            self.scale
        } else {
            -self.scale
        }
    }
}

/// A contractive problem: operator, modulus `gamma`, affine constant `C`
/// (`||F(x)||_v <= gamma ||x||_v + C`), weights and noise bound.
pub struct SaProblem<O> {
    pub operator: O,
    pub gamma: f64,
    pub c: f64,
    pub weights: WeightVector,
    pub w_bar: f64,
    pub fixed_point: Option<Vec<f64>>,
}

impl<O: Operator> SaProblem<O> {
    pub fn new(operator: O, gamma: f64, c: f64, weights: WeightVector, w_bar: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(Error::input(format!("gamma must be in (0, 1), got {gamma}")));
        }
        if !(c >= 0.0 && w_bar >= 0.0) {
            return Err(Error::input("C and w_bar must be non-negative"));
        }
        if operator.dim() != weights.len() {
            return Err(Error::Dimension {
                context: "problem weights",
                expected: operator.dim(),
                found: weights.len(),
            });
        }
        Ok(SaProblem {
            operator,
            gamma,
            c,
            weights,
            w_bar,
            fixed_point: None,
        })
    }

    pub fn with_fixed_point(mut self, x_star: Vec<f64>) -> Result<Self> {
        if x_star.len() != self.weights.len() {
            return Err(Error::Dimension {
                context: "fixed point",
                expected: self.weights.len(),
                found: x_star.len(),
            });
        }
        self.fixed_point = Some(x_star);
        Ok(self)
    }

    /// The known fixed point, or one computed by fixed-point iteration to
    /// within 1e-13 in `||.||_v`.
    pub fn fixed_point(&self) -> Result<Vec<f64>> {
        if let Some(x) = &self.fixed_point {
            return Ok(x.clone());
        }
        let threshold = 1e-13 * (1.0 - self.gamma) / self.gamma;
        let mut x = vec![0.0; self.weights.len()];
        for _ in 0..10_000_000u64 {
            let next = self.operator.apply(&x)?;
            let delta = weighted_distance(&next, &x, &self.weights)?;
            let floor = 8.0 * f64::EPSILON * weighted_norm(&next, &self.weights)?;
            x = next;
            if delta <= threshold.max(floor) {
                return Ok(x);
            }
        }
        Err(Error::Numeric("fixed-point iteration did not converge".into()))
    }
}

/// Almost-sure bound on `||x(t)||_v`:
/// `((1 + gamma) ||x*||_v + w_bar / v_min) / (1 - gamma)`.
pub fn prop3_bound(gamma: f64, xstar_norm: f64, w_bar: f64, v_min: f64) -> f64 {
    ((1.0 + gamma) * xstar_norm + w_bar / v_min) / (1.0 - gamma)
}

/// One checkpoint of an error trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub t: u64,
    pub error: f64,
    /// Step size of the update that produced `x(t)`.
    pub alpha: f64,
}

/// Checks that checkpoints are strictly increasing and inside `[1, horizon]`.
pub fn validate_checkpoints(checkpoints: &[u64], horizon: u64) -> Result<()> {
    if horizon == 0 {
        return Err(Error::input("horizon must be at least 1"));
    }
    if checkpoints.is_empty() {
        return Err(Error::input("at least one checkpoint is required"));
    }
    let mut prev = 0;
    for &c in checkpoints {
        if c <= prev || c > horizon {
            return Err(Error::input(format!(
                "checkpoints must be strictly increasing within [1, {horizon}]; offending value {c}"
            )));
        }
        prev = c;
    }
    Ok(())
}

/// Powers of two up to `horizon`, plus `horizon` itself.
pub fn geometric_checkpoints(horizon: u64) -> Vec<u64> {
    let mut out: Vec<u64> = std::iter::successors(Some(1u64), |c| c.checked_mul(2))
        .take_while(|&c| c <= horizon)
        .collect();
    if out.last() != Some(&horizon) {
        out.push(horizon);
    }
    out
}

/// Roughly `per_decade` log-spaced integers in `[1, horizon]`, always ending at `horizon`.
pub fn log_spaced_checkpoints(horizon: u64, per_decade: u32) -> Vec<u64> {
    let mut out = Vec::new();
    let top = (horizon as f64).log10();
    let steps = (top * per_decade as f64).ceil() as u32;
    for k in 0..=steps {
        let c = 10f64.powf(k as f64 / per_decade as f64).round() as u64;
        let c = c.clamp(1, horizon);
        if out.last().is_none_or(|&l| c > l) {
            out.push(c);
        }
    }
    if out.last() != Some(&horizon) {
        out.push(horizon);
    }
    out
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    /// Abort when `||x(t)||_v` exceeds the almost-sure bound.
    pub assert_bounds: bool,
}

#[derive(Debug, Clone)]
pub struct SaRun {
    pub trace: Vec<TracePoint>,
    pub state: SaState,
    pub fixed_point: Vec<f64>,
    /// Largest `||x(t)||_v` seen along the run.
    pub max_norm: f64,
    pub norm_bound: f64,
}

/// Runs the asynchronous scheme for `horizon` steps, recording
/// `||x(t) - x*||_v` at each checkpoint.
#[allow(clippy::too_many_arguments)]
pub fn run_sa<O, V, N, R>(
    problem: &SaProblem<O>,
    visits: &mut V,
    noise: &mut N,
    schedule: &StepSchedule,
    horizon: u64,
    checkpoints: &[u64],
    rng: &mut R,
    options: RunOptions,
) -> Result<SaRun>
where
    O: Operator,
    V: VisitSource,
    N: NoiseSource,
    R: Rng + ?Sized,
{
    schedule.validate()?;
    validate_checkpoints(checkpoints, horizon)?;
    let n = problem.weights.len();
    if visits.dim() != n {
        return Err(Error::Dimension {
            context: "visit source",
            expected: n,
            found: visits.dim(),
        });
    }
    if noise.bound() > problem.w_bar {
        return Err(Error::input(format!(
            "noise bound {} exceeds the problem's w_bar {}",
            noise.bound(),
            problem.w_bar
        )));
    }
    let x_star = problem.fixed_point()?;
    let v = problem.weights.as_slice();
    let norm_bound = prop3_bound(
        problem.gamma,
        weighted_norm(&x_star, &problem.weights)?,
        problem.w_bar,
        problem.weights.min(),
    );

    let mut state = SaState::new(n);
    let mut trace = Vec::with_capacity(checkpoints.len());
    let mut next_cp = checkpoints.iter().copied().peekable();
    let mut max_norm: f64 = 0.0;
    for t in 0..horizon {
        let i = visits.next_visit(rng);
        let alpha = schedule.step_size_at(t, state.visit_counts[i]);
        let f_i = problem.operator.apply_coord(&state.x, i)?;
        let w = noise.sample(i, rng);
        if w.abs() > problem.w_bar + BOUND_ASSERT_TOL {
            return Err(Error::Invariant {
                step: t,
                detail: format!("|w| = {} exceeds w_bar = {}", w.abs(), problem.w_bar),
            });
        }
        state.sa_step(i, f_i, w, alpha)?;
        // Only coordinate i moved, so checking it keeps ||x(t)||_v in bound.
        let ratio = state.x[i].abs() / v[i];
        max_norm = max_norm.max(ratio);
        if options.assert_bounds && ratio > norm_bound + BOUND_ASSERT_TOL {
            return Err(Error::Invariant {
                step: t + 1,
                detail: format!("||x(t)||_v >= {ratio} exceeds the a.s. bound {norm_bound}"),
            });
        }
        if next_cp.peek() == Some(&(t + 1)) {
            next_cp.next();
            trace.push(TracePoint {
                t: t + 1,
                error: weighted_distance(&state.x, &x_star, &problem.weights)?,
                alpha,
            });
        }
    }
    Ok(SaRun {
        trace,
        state,
        fixed_point: x_star,
        max_norm,
        norm_bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::Matrix;
    use crate::norms::{induced_matrix_norm, AffineOperator, FnOperator};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn step_size_examples() {
        let s = StepSchedule::rescaled_linear(40.0, 160.0).unwrap();
        assert_eq!(s.step_size_at(0, 0), 0.25);
        assert_eq!(StepSchedule::Linear.step_size_at(9, 0), 0.1);
        let s = StepSchedule::PerCoordinate { h: 2.0, t0: 8.0 };
        assert_eq!(s.step_size_at(1000, 2), 0.2);
        assert_eq!(StepSchedule::Polynomial { omega: 0.5 }.step_size_at(3, 0), 0.5);
    }

    #[test]
    fn schedule_validation() {
        assert!(StepSchedule::rescaled_linear(2.0, 1.0).is_err());
        assert!(StepSchedule::rescaled_linear(1.0, 0.0).is_err());
        assert!(StepSchedule::Constant { alpha: 1.5 }.validate().is_err());
        assert!(StepSchedule::Polynomial { omega: 0.0 }.validate().is_err());
        assert!(StepSchedule::rescaled_linear_compliant(10.0, 39.0, 1).is_err());
        assert!(StepSchedule::rescaled_linear_compliant(10.0, 40.0, 41).is_err());
        assert!(StepSchedule::rescaled_linear_compliant(10.0, 40.0, 40).is_ok());
        let s = StepSchedule::theorem_compliant(0.25, 0.5, 100).unwrap();
        assert_eq!(s, StepSchedule::RescaledLinear { h: 16.0, t0: 100.0 });
    }

    #[test]
    fn schedule_json_shape() {
        let s: StepSchedule = serde_json::from_str(r#"{"kind":"rescaled_linear","h":2,"t0":8}"#).unwrap();
        assert_eq!(s, StepSchedule::RescaledLinear { h: 2.0, t0: 8.0 });
        let s: StepSchedule = serde_json::from_str(r#"{"kind":"linear"}"#).unwrap();
        assert_eq!(s, StepSchedule::Linear);
        assert!(serde_json::from_str::<StepSchedule>(r#"{"kind":"constant","alpha":1,"h":1}"#).is_err());
    }

    #[test]
    fn sa_step_examples() {
        let mut s = SaState::new(3);
        s.sa_step(1, 1.0, 0.0, 0.1).unwrap();
        assert_eq!(s.x, vec![0.0, 0.1, 0.0]);
        assert_eq!((s.t, s.visit_counts.clone()), (1, vec![0, 1, 0]));

        let mut s = SaState::new(2);
        s.x = vec![0.3, -0.7];
        s.sa_step(0, 2.5, 0.0, 1.0).unwrap();
        assert_eq!(s.x, vec![2.5, -0.7]);

        let before = s.x.clone();
        s.sa_step(1, -0.7, 0.0, 0.4).unwrap();
        assert_eq!(s.x, before);
        assert_eq!(s.t, 2);
    }

    #[test]
    fn sa_step_errors() {
        let mut s = SaState::new(2);
        assert!(matches!(s.sa_step(0, f64::NAN, 0.0, 0.5), Err(Error::Numeric(_))));
        assert!(matches!(s.sa_step(0, 1.0, f64::INFINITY, 0.5), Err(Error::Numeric(_))));
        assert!(s.sa_step(0, 1.0, 0.0, 0.0).is_err());
        assert!(s.sa_step(5, 1.0, 0.0, 0.5).is_err());
        assert_eq!(s, SaState::new(2));
    }

    #[test]
    fn prop3_examples() {
        assert_eq!(prop3_bound(0.5, 1.0, 0.0, 1.0), 3.0);
        assert_eq!(prop3_bound(0.0, 0.0, 2.0, 1.0), 2.0);
        assert!((prop3_bound(0.9, 10.0, 2.0, 0.5) - 230.0).abs() < 1e-9);
    }

    fn scalar_problem(gamma: f64, c: f64) -> SaProblem<AffineOperator> {
        let op = AffineOperator::new(Matrix::diagonal(&[gamma]), vec![c]).unwrap();
        SaProblem::new(op, gamma, c, WeightVector::ones(1), 0.0).unwrap()
    }

    #[test]
    fn scalar_run_matches_closed_form_recursion() {
        let (gamma, c) = (0.5, 1.0);
        let problem = scalar_problem(gamma, c);
        let schedule = StepSchedule::rescaled_linear(4.0, 16.0).unwrap();
        let horizon = 500;
        let checkpoints: Vec<u64> = (1..=horizon).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let run = run_sa(
            &problem,
            &mut RoundRobin::new(1),
            &mut ZeroNoise,
            &schedule,
            horizon,
            &checkpoints,
            &mut rng,
            RunOptions { assert_bounds: true },
        )
        .unwrap();

        let mut err = c / (1.0 - gamma);
        for (t, point) in run.trace.iter().enumerate() {
            let alpha = 4.0 / (t as f64 + 16.0);
            err *= 1.0 - alpha * (1.0 - gamma);
            assert_eq!(point.t, t as u64 + 1);
            assert!((point.error - err).abs() <= 1e-12, "t = {t}");
            assert_eq!(point.alpha, alpha);
        }
    }

    #[test]
    fn fixed_point_is_invariant_without_noise() {
        // F(x) = 0.5 x has fixed point 0 = x(0).
        let op = FnOperator::new(3, |x: &[f64]| x.iter().map(|v| 0.5 * v).collect());
        let problem = SaProblem::new(op, 0.5, 0.0, WeightVector::ones(3), 0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let run = run_sa(
            &problem,
            &mut IidVisits::uniform(3),
            &mut ZeroNoise,
            &StepSchedule::Linear,
            1000,
            &geometric_checkpoints(1000),
            &mut rng,
            RunOptions { assert_bounds: true },
        )
        .unwrap();
        assert!(run.trace.iter().all(|p| p.error == 0.0));
    }

    fn random_affine(seed: u64, n: usize, gamma: f64) -> (AffineOperator, WeightVector) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let weights =
            WeightVector::new((0..n).map(|_| rng.gen_range(0.5..2.0)).collect()).unwrap();
        let raw = Matrix::from_vec(n, n, (0..n * n).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .unwrap();
        let scale = gamma / induced_matrix_norm(&raw, &weights).unwrap();
        let a = Matrix::from_vec(n, n, raw.as_slice().iter().map(|x| x * scale).collect()).unwrap();
        let b = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
        (AffineOperator::new(a, b).unwrap(), weights)
    }

    #[test]
    fn runs_are_deterministic() {
        let (op, weights) = random_affine(3, 4, 0.7);
        let problem = SaProblem::new(op, 0.7, 5.0, weights, 1.0).unwrap();
        let chain = MarkovChain::from_rows(vec![
            vec![0.1, 0.4, 0.3, 0.2],
            vec![0.3, 0.3, 0.2, 0.2],
            vec![0.25, 0.25, 0.25, 0.25],
            vec![0.5, 0.1, 0.1, 0.3],
        ])
        .unwrap();
        let run = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            run_sa(
                &problem,
                &mut MarkovVisits::new(chain.clone(), 0).unwrap(),
                &mut UniformNoise { half_width: 1.0 },
                &StepSchedule::rescaled_linear(10.0, 40.0).unwrap(),
                5000,
                &geometric_checkpoints(5000),
                &mut rng,
                RunOptions { assert_bounds: true },
            )
            .unwrap()
            .trace
        };
        let a = run(11);
        assert_eq!(a, run(11));
        assert_ne!(a, run(12));
        assert!(a.last().unwrap().error < a[0].error);
    }

    #[test]
    fn full_sweeps_contract_by_gamma() {
        let gamma = 0.6;
        let (op, weights) = random_affine(5, 5, gamma);
        let problem = SaProblem::new(op, gamma, 10.0, weights, 0.0).unwrap();
        let sweeps = 20u64;
        let checkpoints: Vec<u64> = (1..=sweeps).map(|k| 5 * k).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let run = run_sa(
            &problem,
            &mut RoundRobin::new(5),
            &mut ZeroNoise,
            &StepSchedule::Constant { alpha: 1.0 },
            5 * sweeps,
            &checkpoints,
            &mut rng,
            RunOptions { assert_bounds: true },
        )
        .unwrap();
        let initial = weighted_norm(&run.fixed_point, &problem.weights).unwrap();
        let mut prev = initial;
        for p in &run.trace {
            assert!(p.error <= gamma * prev + 1e-12, "{} > {gamma} * {prev}", p.error);
            prev = p.error;
        }
    }

    #[test]
    fn visit_counts_sum_to_t_and_norm_stays_bounded() {
        let (op, weights) = random_affine(8, 3, 0.9);
        let problem = SaProblem::new(op, 0.9, 5.0, weights, 3.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let run = run_sa(
            &problem,
            &mut IidVisits::new(vec![0.2, 0.5, 0.3]).unwrap(),
            &mut RademacherNoise { scale: 3.0 },
            &StepSchedule::Constant { alpha: 0.9 },
            20_000,
            &[20_000],
            &mut rng,
            RunOptions { assert_bounds: true },
        )
        .unwrap();
        assert_eq!(run.state.visit_counts.iter().sum::<u64>(), 20_000);
        assert_eq!(run.state.t, 20_000);
        assert!(run.max_norm <= run.norm_bound + BOUND_ASSERT_TOL);
    }

    #[test]
    fn noise_exceeding_declared_bound_is_rejected() {
        let problem = scalar_problem(0.5, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let err = run_sa(
            &problem,
            &mut RoundRobin::new(1),
            &mut UniformNoise { half_width: 1.0 },
            &StepSchedule::Linear,
            10,
            &[10],
            &mut rng,
            RunOptions::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Input(_)));
    }

    #[test]
    fn broken_contract_trips_the_bound_assertion() {
        // Declared gamma = 0.1 but the operator expands; the a.s. bound
        // derived from the declared constants is violated.
        let op = FnOperator::new(1, |x: &[f64]| vec![3.0 * x[0] + 1.0]);
        let problem = SaProblem::new(op, 0.1, 1.0, WeightVector::ones(1), 0.0)
            .unwrap()
            .with_fixed_point(vec![1.0 / 0.9])
            .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let err = run_sa(
            &problem,
            &mut RoundRobin::new(1),
            &mut ZeroNoise,
            &StepSchedule::Constant { alpha: 1.0 },
            100,
            &[100],
            &mut rng,
            RunOptions { assert_bounds: true },
        )
        .unwrap_err();
        assert!(matches!(err, Error::Invariant { .. }), "{err}");
        assert_eq!(err.exit_code(), 3);
    }

    #[test]
    fn checkpoint_helpers() {
        assert_eq!(geometric_checkpoints(10), vec![1, 2, 4, 8, 10]);
        assert_eq!(geometric_checkpoints(8), vec![1, 2, 4, 8]);
        let cps = log_spaced_checkpoints(1_000_000, 10);
        assert_eq!(cps[0], 1);
        assert_eq!(*cps.last().unwrap(), 1_000_000);
        assert!(cps.windows(2).all(|w| w[0] < w[1]));
        assert!(validate_checkpoints(&[1, 1], 5).is_err());
        assert!(validate_checkpoints(&[0, 1], 5).is_err());
        assert!(validate_checkpoints(&[6], 5).is_err());
        assert!(validate_checkpoints(&[1, 5], 5).is_ok());
    }
}
