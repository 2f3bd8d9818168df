//! Finite-time error bounds and numeric checks of the supporting lemmas.
//!
//! The bound evaluators take the displayed constants at face value. The
//! `lemma*` and `shifted_azuma_mc` functions verify the step-size product
//! inequalities and the shifted concentration inequality on concrete inputs.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chain::ceil_log2;
use crate::error::{check_finite, Error, Result};
use crate::seeding::replication_rng;

/// Relative slack on step-size conditions, so that an `h` computed as
/// exactly the required value is not rejected by rounding.
pub const CONDITION_REL_TOL: f64 = 1e-12;

/// Upper limit for the horizon search.
pub const HORIZON_CAP: u64 = 1 << 62;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Theorem1Inputs {
    pub gamma: f64,
    pub sigma: f64,
    pub tau: u64,
    pub h: f64,
    pub t0: f64,
    pub delta: f64,
    /// Dimension of the iterate.
    pub n: u64,
    /// Affine constant: `||F(x)||_v <= gamma ||x||_v + C`.
    #[serde(rename = "C", alias = "c")]
    pub c: f64,
    pub w_bar: f64,
    pub v_min: f64,
    /// A priori bound on `||x(t)||_v`.
    pub x_bar: f64,
    #[serde(rename = "T")]
    pub horizon: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Theorem2Inputs {
    pub r_bar: f64,
    pub gamma: f64,
    pub mu_min: f64,
    pub t_mix: u64,
    pub h: f64,
    pub t0: f64,
    pub delta: f64,
    /// `|S| |A|`.
    pub n_sa: u64,
    #[serde(rename = "T")]
    pub horizon: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub name: String,
    pub value: f64,
    pub required: f64,
    /// `value - required`.
    pub margin: f64,
    pub holds: bool,
}

impl Condition {
    fn at_least(name: &str, value: f64, required: f64) -> Self {
        Condition {
            name: name.to_string(),
            value,
            required,
            margin: value - required,
            holds: value >= required * (1.0 - CONDITION_REL_TOL),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepsizeReport {
    pub conditions: Vec<Condition>,
    pub passed: bool,
}

impl StepsizeReport {
    fn new(conditions: Vec<Condition>) -> Self {
        let passed = conditions.iter().all(|c| c.holds);
        StepsizeReport { conditions, passed }
    }
}

/// A bound value together with whether the step-size conditions behind it hold.
/// When they do not, the value is advisory only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundValue {
    pub value: f64,
    pub conditions_met: bool,
    pub report: StepsizeReport,
}

fn require(ok: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Input(msg()))
    }
}

fn check_common(gamma: f64, h: f64, t0: f64, delta: f64, horizon: u64) -> Result<()> {
    require((0.0..1.0).contains(&gamma), || format!("gamma must be in [0, 1), got {gamma}"))?;
    require(h > 0.0 && h.is_finite(), || format!("h must be positive, got {h}"))?;
    require(t0 > 0.0 && t0.is_finite(), || format!("t0 must be positive, got {t0}"))?;
    require(delta > 0.0 && delta < 1.0, || format!("delta must be in (0, 1), got {delta}"))?;
    require(horizon >= 1, || "T must be at least 1".to_string())
}

impl Theorem1Inputs {
    pub fn validate(&self) -> Result<()> {
        check_common(self.gamma, self.h, self.t0, self.delta, self.horizon)?;
        require(self.sigma > 0.0 && self.sigma <= 1.0, || {
            format!("sigma must be in (0, 1], got {}", self.sigma)
        })?;
        require(self.tau >= 1, || "tau must be at least 1".to_string())?;
        require(self.n >= 1, || "n must be at least 1".to_string())?;
        require(self.c >= 0.0 && self.w_bar >= 0.0 && self.x_bar >= 0.0, || {
            "C, w_bar and x_bar must be non-negative".to_string()
        })?;
        require(self.v_min > 0.0, || format!("v_min must be positive, got {}", self.v_min))
    }

    /// `2 x_bar + C + w_bar / v_min`.
    pub fn eps_bar(&self) -> f64 {
        2.0 * self.x_bar + self.c + self.w_bar / self.v_min
    }
}

impl Theorem2Inputs {
    pub fn validate(&self) -> Result<()> {
        check_common(self.gamma, self.h, self.t0, self.delta, self.horizon)?;
        require(self.mu_min > 0.0 && self.mu_min <= 1.0, || {
            format!("mu_min must be in (0, 1], got {}", self.mu_min)
        })?;
        require(self.t_mix >= 1, || "t_mix must be at least 1".to_string())?;
        require(self.n_sa >= 1, || "n_sa must be at least 1".to_string())?;
        require(self.r_bar >= 0.0, || format!("r_bar must be non-negative, got {}", self.r_bar))
    }

    /// `ceil(log2(2 / mu_min)) * t_mix`.
    pub fn tau(&self) -> u64 {
        ceil_log2(2.0 / self.mu_min) * self.t_mix
    }

    /// The general-problem inputs obtained with `sigma = mu_min / 2`,
    /// `C = r_bar`, `x_bar = r_bar / (1 - gamma)`, `w_bar = 2 r_bar / (1 - gamma)`,
    /// unit weights and `n = |S| |A|`.
    pub fn as_theorem1(&self) -> Theorem1Inputs {
        let x_bar = self.r_bar / (1.0 - self.gamma);
        Theorem1Inputs {
            gamma: self.gamma,
            sigma: self.mu_min / 2.0,
            tau: self.tau(),
            h: self.h,
            t0: self.t0,
            delta: self.delta,
            n: self.n_sa,
            c: self.r_bar,
            w_bar: 2.0 * x_bar,
            v_min: 1.0,
            x_bar,
            horizon: self.horizon,
        }
    }

    pub fn with_horizon(&self, horizon: u64) -> Self {
        Theorem2Inputs { horizon, ..*self }
    }
}

/// `t0 >= max(4h, tau)` and `h >= 2 / (sigma (1 - gamma))`.
pub fn validate_stepsize_t1(inputs: &Theorem1Inputs) -> StepsizeReport {
    let Theorem1Inputs { gamma, sigma, tau, h, t0, .. } = *inputs;
    StepsizeReport::new(vec![
        Condition::at_least("t0 >= max(4h, tau)", t0, (4.0 * h).max(tau as f64)),
        Condition::at_least("h >= 2/(sigma(1-gamma))", h, 2.0 / (sigma * (1.0 - gamma))),
    ])
}

/// `t0 >= max(4h, tau)` and `h >= 4 / (mu_min (1 - gamma))`.
pub fn validate_stepsize_t2(inputs: &Theorem2Inputs) -> StepsizeReport {
    let Theorem2Inputs { gamma, mu_min, h, t0, .. } = *inputs;
    StepsizeReport::new(vec![
        Condition::at_least("t0 >= max(4h, tau)", t0, (4.0 * h).max(inputs.tau() as f64)),
        Condition::at_least("h >= 4/(mu_min(1-gamma))", h, 4.0 / (mu_min * (1.0 - gamma))),
    ])
}

/// High-probability bound on `||x(T) - x*||_v` for a general contraction.
pub fn theorem1_rhs(inputs: &Theorem1Inputs) -> Result<BoundValue> {
    inputs.validate()?;
    let Theorem1Inputs { gamma, sigma, h, t0, delta, .. } = *inputs;
    let tau = inputs.tau as f64;
    let n = inputs.n as f64;
    let big_t = inputs.horizon as f64;
    let eps = inputs.eps_bar();

    let log_arg = 2.0 * (tau + 1.0) * big_t * big_t * n / delta;
    let leading = (12.0 * eps / (1.0 - gamma))
        * ((tau + 1.0) * h / sigma).sqrt()
        * (log_arg.ln() / (big_t + t0)).sqrt();
    let burn_in = (4.0 / (1.0 - gamma))
        * (16.0 * eps * h * tau / sigma).max(2.0 * inputs.x_bar * (tau + t0))
        / (big_t + t0);
    let value = check_finite("t1 bound", leading + burn_in)?;
    let report = validate_stepsize_t1(inputs);
    Ok(BoundValue {
        value,
        conditions_met: report.passed,
        report,
    })
}

/// High-probability bound on `||Q(T) - Q*||_inf` for Q-learning.
pub fn theorem2_rhs(inputs: &Theorem2Inputs) -> Result<BoundValue> {
    inputs.validate()?;
    let Theorem2Inputs { r_bar, gamma, mu_min, h, t0, delta, .. } = *inputs;
    let tau = inputs.tau() as f64;
    let n_sa = inputs.n_sa as f64;
    let big_t = inputs.horizon as f64;
    let scale = r_bar / ((1.0 - gamma) * (1.0 - gamma));

    let log_arg = 2.0 * (tau + 1.0) * big_t * big_t * n_sa / delta;
    let leading = 60.0
        * scale
        * (2.0 * (tau + 1.0) * h / mu_min).sqrt()
        * (log_arg.ln() / (big_t + t0)).sqrt();
    let burn_in = 4.0 * scale * (160.0 * h * tau / mu_min).max(2.0 * (tau + t0)) / (big_t + t0);
    let value = check_finite("t2 bound", leading + burn_in)?;
    let report = validate_stepsize_t2(inputs);
    Ok(BoundValue {
        value,
        conditions_met: report.passed,
        report,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleComplexity {
    /// Smallest `T` found with bound `<= epsilon`.
    pub horizon: u64,
    /// `r_bar^2 t_mix / ((1 - gamma)^5 mu_min^2 epsilon^2)`, constants dropped.
    pub asymptotic: f64,
}

/// Smallest horizon at which the Q-learning bound drops to `epsilon`.
///
/// `inputs.horizon` is ignored. Brackets by doubling, then bisects.
pub fn sample_complexity_t2(inputs: &Theorem2Inputs, epsilon: f64) -> Result<SampleComplexity> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::input(format!("epsilon must be positive, got {epsilon}")));
    }
    let Theorem2Inputs { r_bar, gamma, mu_min, t_mix, .. } = *inputs;
    let asymptotic = r_bar * r_bar * t_mix as f64
        / ((1.0 - gamma).powi(5) * mu_min * mu_min * epsilon * epsilon);
    let at = |t: u64| theorem2_rhs(&inputs.with_horizon(t)).map(|b| b.value);

    if at(1)? <= epsilon {
        return Ok(SampleComplexity { horizon: 1, asymptotic });
    }
    let mut lo = 1u64;
    let mut hi = 2u64;
    while at(hi)? > epsilon {
        if hi >= HORIZON_CAP {
            return Err(Error::Unattainable(format!(
                "bound stays above {epsilon} up to T = {HORIZON_CAP}"
            )));
        }
        lo = hi;
        hi *= 2;
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if at(mid)? <= epsilon {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(SampleComplexity { horizon: hi, asymptotic })
}

/// Rescaled-linear step sizes `alpha_l = h / (l + t0)` with a lower bound
/// `sigma` on the visitation probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaSequence {
    pub h: f64,
    pub t0: f64,
    pub sigma: f64,
}

impl BetaSequence {
    pub fn new(h: f64, t0: f64, sigma: f64) -> Result<Self> {
        if !(h > 0.0 && t0 > 0.0 && sigma > 0.0 && sigma <= 1.0) {
            return Err(Error::input(format!(
                "need h > 0, t0 > 0, sigma in (0, 1]; got h = {h}, t0 = {t0}, sigma = {sigma}"
            )));
        }
        if sigma * h / t0 >= 1.0 {
            return Err(Error::Schedule(format!(
                "sigma * alpha_0 = {} is not below 1",
                sigma * h / t0
            )));
        }
        Ok(BetaSequence { h, t0, sigma })
    }

    pub fn alpha(&self, l: u64) -> f64 {
        self.h / (l as f64 + self.t0)
    }

    /// `(beta_{k,t}, beta~_{k,t})` for `k = 0..=t`, built backwards from
    /// `beta~_{t,t} = 1` with `beta~_{k-1,t} = beta~_{k,t} (1 - alpha_k sigma)`.
    pub fn profile(&self, t: u64) -> (Vec<f64>, Vec<f64>) {
        let len = t as usize + 1;
        let mut tilde = vec![1.0; len];
        for k in (1..len).rev() {
            tilde[k - 1] = tilde[k] * (1.0 - self.alpha(k as u64) * self.sigma);
        }
        let beta = tilde.iter().enumerate().map(|(k, b)| self.alpha(k as u64) * b).collect();
        (beta, tilde)
    }
}

/// `beta_{k,t} = alpha_k prod_{l=k+1}^t (1 - alpha_l sigma)` and the same
/// product without `alpha_k`.
pub fn beta(k: u64, t: u64, h: f64, t0: f64, sigma: f64) -> Result<(f64, f64)> {
    if k > t {
        return Err(Error::input(format!("need k <= t, got k = {k}, t = {t}")));
    }
    let seq = BetaSequence { h, t0, sigma };
    let mut tilde = 1.0;
    for l in k + 1..=t {
        let factor = seq.alpha(l) * sigma;
        if factor >= 1.0 {
            return Err(Error::Schedule(format!("sigma * alpha_{l} = {factor} is not below 1")));
        }
        tilde *= 1.0 - factor;
    }
    Ok((seq.alpha(k) * tilde, tilde))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lemma3Row {
    pub t: u64,
    /// Smallest relative slack `(rhs - lhs) / rhs` of the per-`k` bounds on
    /// `beta` and `beta~` over `1 <= k < t` (at `k = t` both are equalities).
    pub a_margin: f64,
    /// Largest `lhs / rhs` of the per-`k` bounds over `1 <= k <= t`.
    pub a_max_ratio: f64,
    pub b_lhs: f64,
    pub b_rhs: f64,
    pub c_lhs: f64,
    pub c_rhs: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lemma3Report {
    pub preconditions_met: bool,
    pub rows: Vec<Lemma3Row>,
    pub holds: bool,
    /// Smallest relative margin across (a), (b) and (c) and all rows.
    pub worst_margin: f64,
}

impl Lemma3Report {
    fn unmet() -> Self {
        Lemma3Report {
            preconditions_met: false,
            rows: Vec::new(),
            holds: false,
            worst_margin: f64::NAN,
        }
    }
}

/// Checks, for each `t`, the three product inequalities for rescaled-linear
/// steps:
///
/// - (a) `beta_{k,t} <= h/(k+t0) ((k+1+t0)/(t+1+t0))^(sigma h)` and the same
///   bound without `h/(k+t0)` for `beta~_{k,t}`,
/// - (b) `sum_{k=1}^t beta_{k,t}^2 <= (2h/sigma) / (t+1+t0)`,
/// - (c) `sum_{k=tau}^t beta_{k,t} sum_{l=k-tau+1}^k alpha_{l-1} <= (8 h tau / sigma) / (t+1+t0)`.
///
/// Requires `h > 2/sigma` and `t0 >= max(4h, tau)`.
pub fn lemma3_check(h: f64, t0: f64, sigma: f64, tau: u64, t_values: &[u64]) -> Result<Lemma3Report> {
    if !(sigma > 0.0 && sigma <= 1.0 && h.is_finite() && t0.is_finite()) {
        return Err(Error::input(format!("invalid parameters h = {h}, t0 = {t0}, sigma = {sigma}")));
    }
    if !(h > 2.0 / sigma) || t0 < (4.0 * h).max(tau as f64) || tau == 0 {
        return Ok(Lemma3Report::unmet());
    }
    let seq = BetaSequence::new(h, t0, sigma)?;
    let sh = sigma * h;
    let mut rows = Vec::with_capacity(t_values.len());
    for &t in t_values {
        let (beta, tilde) = seq.profile(t);
        let end = t as f64 + 1.0 + t0;

        let mut a_margin = f64::INFINITY;
        let mut a_max_ratio: f64 = 0.0;
        for k in 1..=t {
            let decay = ((k as f64 + 1.0 + t0) / end).powf(sh);
            let bound_beta = seq.alpha(k) * decay;
            let ratio = (beta[k as usize] / bound_beta).max(tilde[k as usize] / decay);
            a_max_ratio = a_max_ratio.max(ratio);
            if k < t {
                a_margin = a_margin.min(1.0 - ratio);
            }
        }

        let b_lhs: f64 = beta[1..].iter().map(|b| b * b).sum();
        let b_rhs = 2.0 * h / sigma / end;

        // window[k] = sum_{j=k-tau}^{k-1} alpha_j through prefix sums.
        let mut prefix = vec![0.0; t as usize + 1];
        for j in 0..t as usize {
            prefix[j + 1] = prefix[j] + seq.alpha(j as u64);
        }
        let c_lhs: f64 = (tau..=t)
            .map(|k| {
                let (k, tau) = (k as usize, tau as usize);
                beta[k] * (prefix[k] - prefix[k - tau])
            })
            .sum();
        let c_rhs = 8.0 * h * tau as f64 / sigma / end;

        let holds = a_max_ratio <= 1.0 + 1e-12 && (t <= 1 || a_margin > 0.0) && b_lhs < b_rhs && c_lhs < c_rhs;
        rows.push(Lemma3Row {
            t,
            a_margin,
            a_max_ratio,
            b_lhs,
            b_rhs,
            c_lhs,
            c_rhs,
            holds,
        });
    }
    let holds = rows.iter().all(|r| r.holds);
    let worst_margin = rows
        .iter()
        .flat_map(|r| [r.a_margin, 1.0 - r.b_lhs / r.b_rhs, 1.0 - r.c_lhs / r.c_rhs])
        .fold(f64::INFINITY, f64::min);
    Ok(Lemma3Report {
        preconditions_met: true,
        rows,
        holds,
        worst_margin,
    })
}

/// Parameters of the weighted-sum inequality with visitation rates `d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Lemma7Params {
    pub h: f64,
    pub t0: f64,
    pub sigma: f64,
    pub gamma: f64,
    pub tau: u64,
    pub t: u64,
    pub omega: f64,
}

impl Lemma7Params {
    /// `sigma h (1 - sqrt(gamma)) >= 1`, `t0 >= 1`, `h / t0 <= 1/2`, `0 < omega <= 1`.
    pub fn preconditions_met(&self) -> bool {
        let Lemma7Params { h, t0, sigma, gamma, tau, t, omega } = *self;
        gamma > 0.0
            && gamma < 1.0
            && sigma > 0.0
            && sigma <= 1.0
            && sigma * h * (1.0 - gamma.sqrt()) >= 1.0 * (1.0 - CONDITION_REL_TOL)
            && t0 >= 1.0
            && h / t0 <= 0.5
            && omega > 0.0
            && omega <= 1.0
            && tau <= t
    }

    /// `1 / (sqrt(gamma) (t + 1 + t0)^omega)`.
    pub fn rhs(&self) -> f64 {
        1.0 / (self.gamma.sqrt() * (self.t as f64 + 1.0 + self.t0).powf(self.omega))
    }
}

/// Step sizes and weights shared by every `d` sequence of one parameter set.
struct Lemma7Kernel {
    tau: usize,
    alpha: Vec<f64>,
    /// `alpha_k (k + t0)^(-omega)`.
    weight: Vec<f64>,
    rhs: f64,
}

impl Lemma7Kernel {
    fn new(params: &Lemma7Params) -> Self {
        let Lemma7Params { h, t0, tau, t, omega, .. } = *params;
        let alpha: Vec<f64> = (0..=t).map(|k| h / (k as f64 + t0)).collect();
        let weight = alpha
            .iter()
            .enumerate()
            .map(|(k, a)| a * (k as f64 + t0).powf(-omega))
            .collect();
        Lemma7Kernel {
            tau: tau as usize,
            alpha,
            weight,
            rhs: params.rhs(),
        }
    }

    fn ratio(&self, d: &[f64]) -> Result<f64> {
        if d.len() != self.alpha.len() {
            return Err(Error::Dimension {
                context: "d sequence",
                expected: self.alpha.len(),
                found: d.len(),
            });
        }
        let mut tail = 1.0;
        let mut lhs = 0.0;
        for k in (self.tau..d.len()).rev() {
            lhs += self.weight[k] * d[k] * tail;
            tail *= 1.0 - self.alpha[k] * d[k];
        }
        Ok(lhs / self.rhs)
    }
}

/// `sum_{k=tau}^t b_{k,t} (k + t0)^(-omega) / rhs` with
/// `b_{k,t} = alpha_k d_k prod_{l=k+1}^t (1 - alpha_l d_l)`; `d` is indexed `0..=t`.
pub fn lemma7_ratio(params: &Lemma7Params, d: &[f64]) -> Result<f64> {
    Lemma7Kernel::new(params).ratio(d)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lemma7Report {
    pub preconditions_met: bool,
    pub sequences: usize,
    pub max_ratio: f64,
    pub holds: bool,
}

impl Lemma7Report {
    fn unmet(sequences: usize) -> Self {
        Lemma7Report {
            preconditions_met: false,
            sequences,
            max_ratio: f64::NAN,
            holds: false,
        }
    }

    fn from_ratios(ratios: &[f64]) -> Self {
        let max_ratio = ratios.iter().copied().fold(0.0, f64::max);
        Lemma7Report {
            preconditions_met: true,
            sequences: ratios.len(),
            max_ratio,
            holds: max_ratio < 1.0,
        }
    }
}

/// Evaluates the inequality on each supplied `d` sequence (entries in `[sigma, 1]`).
pub fn lemma7_check(params: &Lemma7Params, d_seqs: &[Vec<f64>]) -> Result<Lemma7Report> {
    if !params.preconditions_met() {
        return Ok(Lemma7Report::unmet(d_seqs.len()));
    }
    for d in d_seqs {
        if let Some(bad) = d.iter().find(|x| !(params.sigma..=1.0).contains(*x)) {
            return Err(Error::input(format!("d entry {bad} outside [sigma, 1]")));
        }
    }
    let kernel = Lemma7Kernel::new(params);
    let ratios = d_seqs
        .par_iter()
        .map(|d| kernel.ratio(d))
        .collect::<Result<Vec<_>>>()?;
    Ok(Lemma7Report::from_ratios(&ratios))
}

/// A `d` sequence of length `t + 1` with entries uniform in `[sigma, 1]`.
pub fn random_d_sequence<R: Rng + ?Sized>(sigma: f64, t: u64, rng: &mut R) -> Vec<f64> {
    (0..=t).map(|_| rng.gen_range(sigma..=1.0)).collect()
}

/// Weighted-sum check over `count` random `d` sequences, seeded per sequence.
pub fn lemma7_random(params: &Lemma7Params, count: usize, seed: u64) -> Result<Lemma7Report> {
    if !params.preconditions_met() {
        return Ok(Lemma7Report::unmet(count));
    }
    let kernel = Lemma7Kernel::new(params);
    let ratios = (0..count)
        .into_par_iter()
        .map(|i| {
            let d = random_d_sequence(params.sigma, params.t, &mut replication_rng(seed, i as u64));
            kernel.ratio(&d)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Lemma7Report::from_ratios(&ratios))
}

/// Bounded processes `X_k` with `E[X_k | F_{k - tau}] = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProcessSpec {
    Zero,
    /// Independent signs.
    IidRademacher,
    /// `tau` independent streams, `X_k` in stream `k mod tau`; each step is a
    /// fresh sign scaled by 1 or 1/2 depending on that stream's previous sign.
    InterleavedStreams,
    /// One fresh sign per block of `tau` steps, held for the whole block.
    /// Only the history up to the previous block is uninformative.
    BlockRevelation,
}

impl ProcessSpec {
    pub const ALL: [ProcessSpec; 4] = [
        ProcessSpec::Zero,
        ProcessSpec::IidRademacher,
        ProcessSpec::InterleavedStreams,
        ProcessSpec::BlockRevelation,
    ];

    /// Per-step bound `X_bar_k`; every built-in process uses 1.
    pub fn bound(&self) -> f64 {
        1.0
    }

    /// `sum_{k=0}^t X_k` for one sample path.
    pub fn sample_sum<R: Rng + ?Sized>(&self, tau: u64, t: u64, rng: &mut R) -> f64 {
        let sign = |rng: &mut R| if rng.gen::<bool>() { 1.0 } else { -1.0 };
        match self {
            ProcessSpec::Zero => 0.0,
            ProcessSpec::IidRademacher => (0..=t).map(|_| sign(rng)).sum(),
            ProcessSpec::InterleavedStreams => {
                let mut last_positive = vec![true; tau as usize];
                let mut sum = 0.0;
                for k in 0..=t {
                    let stream = (k % tau) as usize;
                    let amp = if last_positive[stream] { 1.0 } else { 0.5 };
                    let s = sign(rng);
                    last_positive[stream] = s > 0.0;
                    sum += amp * s;
                }
                sum
            }
            ProcessSpec::BlockRevelation => {
                let mut sum = 0.0;
                let mut current = 0.0;
                for k in 0..=t {
                    if k % tau == 0 {
                        current = sign(rng);
                    }
                    sum += current;
                }
                sum
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AzumaReport {
    pub process: ProcessSpec,
    pub tau: u64,
    pub t: u64,
    pub delta: f64,
    pub trials: u64,
    /// `sqrt(2 tau sum X_bar_k^2 log(2 tau / delta))`.
    pub threshold: f64,
    pub exceedances: u64,
    pub rate: f64,
    /// `delta + 3 sqrt(delta (1 - delta) / trials)`.
    pub limit: f64,
    pub holds: bool,
}

/// Monte Carlo estimate of `P(|sum_{k=0}^t X_k| > threshold)`.
pub fn shifted_azuma_mc(
    tau: u64,
    process: ProcessSpec,
    t: u64,
    delta: f64,
    trials: u64,
    seed: u64,
) -> Result<AzumaReport> {
    if tau == 0 || trials == 0 {
        return Err(Error::input("tau and trials must be at least 1"));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::input(format!("delta must be in (0, 1), got {delta}")));
    }
    let sum_sq = (t as f64 + 1.0) * process.bound().powi(2);
    let threshold = (2.0 * tau as f64 * sum_sq * (2.0 * tau as f64 / delta).ln()).sqrt();
    let exceedances = (0..trials)
        .into_par_iter()
        .filter(|&i| process.sample_sum(tau, t, &mut replication_rng(seed, i)).abs() > threshold)
        .count() as u64;
    let rate = exceedances as f64 / trials as f64;
    let limit = delta + 3.0 * (delta * (1.0 - delta) / trials as f64).sqrt();
    Ok(AzumaReport {
        process,
        tau,
        t,
        delta,
        trials,
        threshold,
        exceedances,
        rate,
        limit,
        holds: rate <= limit,
    })
}
