//! Finite discounted MDPs: the model, the Bellman optimality operator, a
//! value-iteration oracle for `Q*`, the state-action chain induced by a
//! behavior policy, trajectory sampling and a seeded instance generator.
//!
//! State-action pairs are flattened s-major: index `s * n_actions + a`.

use std::path::Path;

use rand::Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::chain::{MarkovChain, ROW_SUM_TOL};
use crate::error::{check_dim, Error, Result};
use crate::matrix::Matrix;
use crate::norms::Operator;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    Deterministic,
    Uniform,
    TwoPoint,
}

/// Bounded zero-mean reward noise around `r[s][a]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RewardNoise {
    pub kind: NoiseKind,
    #[serde(default)]
    pub half_width: f64,
}

impl RewardNoise {
    pub const DETERMINISTIC: RewardNoise = RewardNoise {
        kind: NoiseKind::Deterministic,
        half_width: 0.0,
    };

    pub fn uniform(half_width: f64) -> Self {
        RewardNoise {
            kind: NoiseKind::Uniform,
            half_width,
        }
    }

    pub fn two_point(half_width: f64) -> Self {
        RewardNoise {
            kind: NoiseKind::TwoPoint,
            half_width,
        }
    }

    /// Largest possible deviation from the mean.
    pub fn bound(&self) -> f64 {
        match self.kind {
            NoiseKind::Deterministic => 0.0,
            _ => self.half_width,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.half_width.is_finite() && self.half_width >= 0.0) {
            return Err(Error::input(format!(
                "reward noise half_width must be finite and non-negative, got {}",
                self.half_width
            )));
        }
        if self.kind == NoiseKind::Deterministic && self.half_width != 0.0 {
            return Err(Error::input("deterministic reward noise must have half_width 0"));
        }
        Ok(())
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.kind {
            NoiseKind::Deterministic => 0.0,
            NoiseKind::Uniform => self.half_width * (2.0 * rng.gen::<f64>() - 1.0),
            NoiseKind::TwoPoint => {
                if rng.gen::<bool>() {
                    self.half_width
                } else {
                    -self.half_width
                }
            }
        }
    }
}

fn check_distribution(what: &str, row: &[f64]) -> Result<()> {
    if let Some(j) = row.iter().position(|p| !(0.0..=1.0).contains(p)) {
        return Err(Error::input(format!("{what}[{j}] = {} is outside [0, 1]", row[j])));
    }
    let sum: f64 = row.iter().sum();
    if (sum - 1.0).abs() > ROW_SUM_TOL {
        return Err(Error::input(format!("{what} sums to {sum}")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct MdpModel {
    n_states: usize,
    n_actions: usize,
    /// `[s][a][s']`, flattened.
    transition: Vec<f64>,
    /// `[s][a]`, flattened.
    mean_reward: Vec<f64>,
    reward_noise: RewardNoise,
    gamma: f64,
    r_bar: f64,
}

impl MdpModel {
    /// Builds a model from nested `[s][a][s']` transitions and `[s][a]` rewards.
    pub fn new(
        transition: Vec<Vec<Vec<f64>>>,
        mean_reward: Vec<Vec<f64>>,
        reward_noise: RewardNoise,
        gamma: f64,
        r_bar: f64,
    ) -> Result<Self> {
        let n_states = transition.len();
        let n_actions = transition.first().map_or(0, Vec::len);
        if n_states == 0 || n_actions == 0 {
            return Err(Error::input("an MDP needs at least one state and one action"));
        }
        let mut flat = Vec::with_capacity(n_states * n_actions * n_states);
        for (s, per_action) in transition.into_iter().enumerate() {
            if per_action.len() != n_actions {
                return Err(Error::input(format!(
                    "transition[{s}] has {} actions, expected {n_actions}",
                    per_action.len()
                )));
            }
            for (a, row) in per_action.into_iter().enumerate() {
                if row.len() != n_states {
                    return Err(Error::input(format!(
                        "transition[{s}][{a}] has {} entries, expected {n_states}",
                        row.len()
                    )));
                }
                flat.extend(row);
            }
        }
        if mean_reward.len() != n_states {
            return Err(Error::input(format!(
                "mean_reward has {} states, expected {n_states}",
                mean_reward.len()
            )));
        }
        let mut rewards = Vec::with_capacity(n_states * n_actions);
        for (s, row) in mean_reward.into_iter().enumerate() {
            if row.len() != n_actions {
                return Err(Error::input(format!(
                    "mean_reward[{s}] has {} actions, expected {n_actions}",
                    row.len()
                )));
            }
            rewards.extend(row);
        }
        MdpModel::from_flat(n_states, n_actions, flat, rewards, reward_noise, gamma, r_bar)
    }

    pub fn from_flat(
        n_states: usize,
        n_actions: usize,
        transition: Vec<f64>,
        mean_reward: Vec<f64>,
        reward_noise: RewardNoise,
        gamma: f64,
        r_bar: f64,
    ) -> Result<Self> {
        if n_states == 0 || n_actions == 0 {
            return Err(Error::input("an MDP needs at least one state and one action"));
        }
        check_dim("transition kernel", n_states * n_actions * n_states, transition.len())?;
        check_dim("mean reward table", n_states * n_actions, mean_reward.len())?;
        if !(0.0..1.0).contains(&gamma) {
            return Err(Error::input(format!("gamma must be in [0, 1), got {gamma}")));
        }
        if !(r_bar.is_finite() && r_bar > 0.0) {
            return Err(Error::input(format!("r_bar must be positive, got {r_bar}")));
        }
        reward_noise.validate()?;
        let model = MdpModel {
            n_states,
            n_actions,
            transition,
            mean_reward,
            reward_noise,
            gamma,
            r_bar,
        };
        for s in 0..n_states {
            for a in 0..n_actions {
                check_distribution(&format!("transition[{s}][{a}]"), model.transition(s, a))?;
                let r = model.mean_reward(s, a);
                if !r.is_finite() || r.abs() + reward_noise.bound() > r_bar {
                    return Err(Error::input(format!(
                        "mean_reward[{s}][{a}] = {r} with noise half-width {} exceeds r_bar = {r_bar}",
                        reward_noise.bound()
                    )));
                }
            }
        }
        Ok(model)
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    /// `|S| * |A|`.
    pub fn n_pairs(&self) -> usize {
        self.n_states * self.n_actions
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn r_bar(&self) -> f64 {
        self.r_bar
    }

    pub fn reward_noise(&self) -> RewardNoise {
        self.reward_noise
    }

    /// `P(. | s, a)`.
    pub fn transition(&self, s: usize, a: usize) -> &[f64] {
        let start = (s * self.n_actions + a) * self.n_states;
        &self.transition[start..start + self.n_states]
    }

    pub fn mean_reward(&self, s: usize, a: usize) -> f64 {
        self.mean_reward[s * self.n_actions + a]
    }

    pub fn mean_rewards(&self) -> &[f64] {
        &self.mean_reward
    }

    /// Copy of the model with a different discount factor.
    pub fn with_gamma(&self, gamma: f64) -> Result<Self> {
        MdpModel::from_flat(
            self.n_states,
            self.n_actions,
            self.transition.clone(),
            self.mean_reward.clone(),
            self.reward_noise,
            gamma,
            self.r_bar,
        )
    }

    fn check_pair(&self, s: usize, a: usize) -> Result<()> {
        if s >= self.n_states || a >= self.n_actions {
            return Err(Error::Index(format!(
                "(s, a) = ({s}, {a}) outside {}x{}",
                self.n_states, self.n_actions
            )));
        }
        Ok(())
    }

    fn check_state(&self, s: usize) -> Result<()> {
        if s >= self.n_states {
            return Err(Error::Index(format!("state {s} outside {}", self.n_states)));
        }
        Ok(())
    }
}

/// `pi(a | s)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BehaviorPolicy {
    n_states: usize,
    n_actions: usize,
    probs: Vec<f64>,
}

impl BehaviorPolicy {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n_states = rows.len();
        let n_actions = rows.first().map_or(0, Vec::len);
        if n_states == 0 || n_actions == 0 {
            return Err(Error::input("policy must be non-empty"));
        }
        let mut probs = Vec::with_capacity(n_states * n_actions);
        for (s, row) in rows.into_iter().enumerate() {
            if row.len() != n_actions {
                return Err(Error::input(format!(
                    "policy[{s}] has {} actions, expected {n_actions}",
                    row.len()
                )));
            }
            check_distribution(&format!("policy[{s}]"), &row)?;
            probs.extend(row);
        }
        Ok(BehaviorPolicy {
            n_states,
            n_actions,
            probs,
        })
    }

    pub fn uniform(n_states: usize, n_actions: usize) -> Self {
        BehaviorPolicy {
            n_states,
            n_actions,
            probs: vec![1.0 / n_actions as f64; n_states * n_actions],
        }
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn action_probs(&self, s: usize) -> &[f64] {
        &self.probs[s * self.n_actions..(s + 1) * self.n_actions]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.n_states).map(|s| self.action_probs(s).to_vec()).collect()
    }

    fn check_matches(&self, mdp: &MdpModel) -> Result<()> {
        check_dim("policy states", mdp.n_states(), self.n_states)?;
        check_dim("policy actions", mdp.n_actions(), self.n_actions)
    }
}

/// Action-value table indexed by `(s, a)`.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    n_states: usize,
    n_actions: usize,
    values: Vec<f64>,
}

impl QTable {
    pub fn zeros(n_states: usize, n_actions: usize) -> Self {
        QTable::filled(n_states, n_actions, 0.0)
    }

    pub fn filled(n_states: usize, n_actions: usize, value: f64) -> Self {
        QTable {
            n_states,
            n_actions,
            values: vec![value; n_states * n_actions],
        }
    }

    pub fn for_mdp(mdp: &MdpModel) -> Self {
        QTable::zeros(mdp.n_states(), mdp.n_actions())
    }

    pub fn from_flat(n_states: usize, n_actions: usize, values: Vec<f64>) -> Result<Self> {
        check_dim("q table", n_states * n_actions, values.len())?;
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!("q table entry {i} is not finite")));
        }
        Ok(QTable {
            n_states,
            n_actions,
            values,
        })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn get(&self, s: usize, a: usize) -> f64 {
        self.values[s * self.n_actions + a]
    }

    pub fn set(&mut self, s: usize, a: usize, value: f64) {
        self.values[s * self.n_actions + a] = value;
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.values[s * self.n_actions..(s + 1) * self.n_actions]
    }

    /// `max_a Q(s, a)`.
    pub fn row_max(&self, s: usize) -> f64 {
        self.row(s).iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Greedy action, lowest index among ties.
    pub fn greedy_action(&self, s: usize) -> usize {
        let row = self.row(s);
        let mut best = 0;
        for (a, &q) in row.iter().enumerate() {
            if q > row[best] {
                best = a;
            }
        }
        best
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.n_states).map(|s| self.row(s).to_vec()).collect()
    }

    pub fn max_abs(&self) -> f64 {
        crate::norms::max_norm(&self.values)
    }

    /// `||self - other||_inf`.
    pub fn distance(&self, other: &QTable) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub(crate) fn check_matches(&self, mdp: &MdpModel) -> Result<()> {
        check_dim("q table states", mdp.n_states(), self.n_states)?;
        check_dim("q table actions", mdp.n_actions(), self.n_actions)
    }
}

/// `sum_{s'} P(s' | s, a) * v[s']`.
pub(crate) fn expect_next(mdp: &MdpModel, s: usize, a: usize, v: &[f64]) -> f64 {
    mdp.transition(s, a).iter().zip(v).map(|(p, x)| p * x).sum()
}

pub(crate) fn row_maxima(q: &QTable) -> Vec<f64> {
    (0..q.n_states()).map(|s| q.row_max(s)).collect()
}

/// Bellman optimality operator
/// `F(Q)(s, a) = r(s, a) + gamma * E_{s'} max_{a'} Q(s', a')`.
pub fn bellman(q: &QTable, mdp: &MdpModel) -> Result<QTable> {
    q.check_matches(mdp)?;
    let v = row_maxima(q);
    let mut out = QTable::for_mdp(mdp);
    for s in 0..mdp.n_states() {
        for a in 0..mdp.n_actions() {
            out.set(s, a, mdp.mean_reward(s, a) + mdp.gamma() * expect_next(mdp, s, a, &v));
        }
    }
    Ok(out)
}

/// The Bellman operator viewed as a map on flattened vectors.
#[derive(Debug, Clone, Copy)]
pub struct BellmanOperator<'a> {
    mdp: &'a MdpModel,
}

impl<'a> BellmanOperator<'a> {
    pub fn new(mdp: &'a MdpModel) -> Self {
        BellmanOperator { mdp }
    }
}

impl Operator for BellmanOperator<'_> {
    fn dim(&self) -> usize {
        self.mdp.n_pairs()
    }

    fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        let q = QTable::from_flat(self.mdp.n_states(), self.mdp.n_actions(), x.to_vec())?;
        Ok(bellman(&q, self.mdp)?.values)
    }

    fn apply_coord(&self, x: &[f64], i: usize) -> Result<f64> {
        check_dim("bellman operator input", self.dim(), x.len())?;
        if i >= self.dim() {
            return Err(Error::Index(format!("coordinate {i} out of range {}", self.dim())));
        }
        let n_a = self.mdp.n_actions();
        let (s, a) = (i / n_a, i % n_a);
        let next: f64 = self
            .mdp
            .transition(s, a)
            .iter()
            .enumerate()
            .map(|(sp, p)| {
                let row = &x[sp * n_a..(sp + 1) * n_a];
                p * row.iter().copied().fold(f64::NEG_INFINITY, f64::max)
            })
            .sum();
        Ok(self.mdp.mean_reward(s, a) + self.mdp.gamma() * next)
    }
}

/// `Q*` by value iteration, accurate to `tol` in the max norm.
///
/// Stops when `||Q_{k+1} - Q_k||_inf <= tol (1 - gamma) / gamma`; the
/// contraction bound then gives `||Q_{k+1} - Q*||_inf <= tol`.
pub fn solve_qstar(mdp: &MdpModel, tol: f64) -> Result<QTable> {
    if !(tol > 0.0) {
        return Err(Error::input(format!("tolerance must be positive, got {tol}")));
    }
    let gamma = mdp.gamma();
    let mut q = QTable::for_mdp(mdp);
    if gamma == 0.0 {
        return bellman(&q, mdp);
    }
    let threshold = tol * (1.0 - gamma) / gamma;
    loop {
        let next = bellman(&q, mdp)?;
        let delta = next.distance(&q);
        // Floor at a few ulps of the table scale; below that the iteration
        // is stuck on a floating-point fixed point.
        let floor = 8.0 * f64::EPSILON * next.max_abs();
        q = next;
        if delta <= threshold.max(floor) {
            return Ok(q);
        }
    }
}

/// Chain on `S x A` with `((s, a) -> (s', a')) = P(s' | s, a) * pi(a' | s')`.
pub fn induced_chain(mdp: &MdpModel, policy: &BehaviorPolicy) -> Result<MarkovChain> {
    policy.check_matches(mdp)?;
    let (n_s, n_a) = (mdp.n_states(), mdp.n_actions());
    let n = n_s * n_a;
    let mut m = Matrix::zeros(n, n);
    for s in 0..n_s {
        for a in 0..n_a {
            let i = s * n_a + a;
            for (sp, &p) in mdp.transition(s, a).iter().enumerate() {
                for (ap, &pi) in policy.action_probs(sp).iter().enumerate() {
                    m.set(i, sp * n_a + ap, p * pi);
                }
            }
        }
    }
    MarkovChain::new(m)
}

/// Inverse-CDF draw from a probability vector.
pub(crate) fn sample_categorical<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // Rounding left the cumulative sum just below u; take the last
    // outcome with positive mass.
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

pub fn sample_reward<R: Rng + ?Sized>(mdp: &MdpModel, s: usize, a: usize, rng: &mut R) -> f64 {
    mdp.mean_reward(s, a) + mdp.reward_noise().sample(rng)
}

pub fn sample_next_state<R: Rng + ?Sized>(mdp: &MdpModel, s: usize, a: usize, rng: &mut R) -> usize {
    sample_categorical(mdp.transition(s, a), rng)
}

pub fn sample_action<R: Rng + ?Sized>(policy: &BehaviorPolicy, s: usize, rng: &mut R) -> usize {
    sample_categorical(policy.action_probs(s), rng)
}

/// One transition of the behavior trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub reward: f64,
    pub next_state: usize,
    pub next_action: usize,
}

/// Draws `r_t`, then `s' ~ P(.|s, a)`, then `a' ~ pi(.|s')`, in that order.
pub fn sample_step<R: Rng + ?Sized>(
    mdp: &MdpModel,
    policy: &BehaviorPolicy,
    s: usize,
    a: usize,
    rng: &mut R,
) -> Result<Transition> {
    mdp.check_pair(s, a)?;
    let reward = sample_reward(mdp, s, a, rng);
    let next_state = sample_next_state(mdp, s, a, rng);
    let next_action = sample_action(policy, next_state, rng);
    Ok(Transition {
        reward,
        next_state,
        next_action,
    })
}

/// Starting pair of a behavior trajectory: `s_0` uniform, `a_0 ~ pi(.|s_0)`.
pub fn sample_start<R: Rng + ?Sized>(
    mdp: &MdpModel,
    policy: &BehaviorPolicy,
    rng: &mut R,
) -> Result<(usize, usize)> {
    let s = rng.gen_range(0..mdp.n_states());
    mdp.check_state(s)?;
    Ok((s, sample_action(policy, s, rng)))
}

/// Parameters of the random instance generator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomMdpSpec {
    pub n_states: usize,
    pub n_actions: usize,
    pub gamma: f64,
    pub r_bar: f64,
    /// Weight of the uniform kernel blended into every transition and
    /// policy row; keeps all entries at least `mix_eps / n`.
    pub mix_eps: f64,
    #[serde(default = "default_noise_kind")]
    pub noise: NoiseKind,
    /// Fraction of `r_bar` used as noise half-width.
    #[serde(default = "default_noise_fraction")]
    pub noise_fraction: f64,
}

fn default_noise_kind() -> NoiseKind {
    NoiseKind::Uniform
}

fn default_noise_fraction() -> f64 {
    0.5
}

impl RandomMdpSpec {
    pub fn new(n_states: usize, n_actions: usize, gamma: f64, r_bar: f64, mix_eps: f64) -> Self {
        RandomMdpSpec {
            n_states,
            n_actions,
            gamma,
            r_bar,
            mix_eps,
            noise: default_noise_kind(),
            noise_fraction: default_noise_fraction(),
        }
    }
}

fn random_simplex_row<R: Rng + ?Sized>(n: usize, mix_eps: f64, rng: &mut R) -> Vec<f64> {
    let draws: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(Exp1)).collect();
    let total: f64 = draws.iter().sum();
    let uniform = 1.0 / n as f64;
    draws
        .into_iter()
        .map(|d| (1.0 - mix_eps) * (d / total) + mix_eps * uniform)
        .collect()
}

/// Random MDP and behavior policy. Transition and policy rows are
/// `Dirichlet(1)` draws blended with the uniform distribution by `mix_eps`,
/// so the induced state-action chain has all entries positive.
pub fn random_mdp<R: Rng + ?Sized>(
    spec: &RandomMdpSpec,
    rng: &mut R,
) -> Result<(MdpModel, BehaviorPolicy)> {
    if spec.n_states == 0 || spec.n_actions == 0 {
        return Err(Error::input("random MDP needs at least one state and one action"));
    }
    if !(spec.mix_eps > 0.0 && spec.mix_eps <= 1.0) {
        return Err(Error::input(format!("mix_eps must be in (0, 1], got {}", spec.mix_eps)));
    }
    if !(0.0..1.0).contains(&spec.noise_fraction) {
        return Err(Error::input(format!(
            "noise_fraction must be in [0, 1), got {}",
            spec.noise_fraction
        )));
    }
    let (n_s, n_a) = (spec.n_states, spec.n_actions);
    let half_width = match spec.noise {
        NoiseKind::Deterministic => 0.0,
        _ => spec.r_bar * spec.noise_fraction,
    };
    let noise = RewardNoise {
        kind: spec.noise,
        half_width,
    };
    let mut transition = Vec::with_capacity(n_s * n_a * n_s);
    for _ in 0..n_s * n_a {
        transition.extend(random_simplex_row(n_s, spec.mix_eps, rng));
    }
    let reward_cap = spec.r_bar - half_width;
    let mean_reward = (0..n_s * n_a)
        .map(|_| {
            let mut r = reward_cap * rng.gen::<f64>();
            while r + half_width > spec.r_bar {
                r = r.next_down();
            }
            r
        })
        .collect();
    let mut policy = Vec::with_capacity(n_s);
    for _ in 0..n_s {
        policy.push(random_simplex_row(n_a, spec.mix_eps, rng));
    }
    let mdp = MdpModel::from_flat(n_s, n_a, transition, mean_reward, noise, spec.gamma, spec.r_bar)?;
    Ok((mdp, BehaviorPolicy::new(policy)?))
}

/// On-disk MDP description (JSON).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MdpFile {
    pub n_states: usize,
    pub n_actions: usize,
    pub gamma: f64,
    pub r_bar: f64,
    /// `[s][a][s']`.
    pub transition: Vec<Vec<Vec<f64>>>,
    /// `[s][a]`.
    pub mean_reward: Vec<Vec<f64>>,
    pub reward_noise: RewardNoise,
    /// `[s][a]`; uniform when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub policy: Option<Vec<Vec<f64>>>,
}

impl MdpFile {
    pub fn from_model(mdp: &MdpModel, policy: Option<&BehaviorPolicy>) -> Self {
        let (n_s, n_a) = (mdp.n_states(), mdp.n_actions());
        MdpFile {
            n_states: n_s,
            n_actions: n_a,
            gamma: mdp.gamma(),
            r_bar: mdp.r_bar(),
            transition: (0..n_s)
                .map(|s| (0..n_a).map(|a| mdp.transition(s, a).to_vec()).collect())
                .collect(),
            mean_reward: (0..n_s)
                .map(|s| (0..n_a).map(|a| mdp.mean_reward(s, a)).collect())
                .collect(),
            reward_noise: mdp.reward_noise(),
            policy: policy.map(BehaviorPolicy::to_rows),
        }
    }

    pub fn into_model(self) -> Result<(MdpModel, BehaviorPolicy)> {
        if self.transition.len() != self.n_states {
            return Err(Error::input(format!(
                "transition lists {} states but n_states = {}",
                self.transition.len(),
                self.n_states
            )));
        }
        if let Some((s, row)) = self
            .transition
            .iter()
            .enumerate()
            .find(|(_, row)| row.len() != self.n_actions)
        {
            return Err(Error::input(format!(
                "transition[{s}] lists {} actions but n_actions = {}",
                row.len(),
                self.n_actions
            )));
        }
        let mdp = MdpModel::new(
            self.transition,
            self.mean_reward,
            self.reward_noise,
            self.gamma,
            self.r_bar,
        )?;
        let policy = match self.policy {
            Some(rows) => {
                let p = BehaviorPolicy::new(rows)?;
                p.check_matches(&mdp)?;
                p
            }
            None => BehaviorPolicy::uniform(mdp.n_states(), mdp.n_actions()),
        };
        Ok((mdp, policy))
    }
}

pub fn load_mdp(path: impl AsRef<Path>) -> Result<(MdpModel, BehaviorPolicy)> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file: MdpFile = serde_json::from_str(&text)?;
    file.into_model()
}

pub fn save_mdp(path: impl AsRef<Path>, mdp: &MdpModel, policy: Option<&BehaviorPolicy>) -> Result<()> {
    let path = path.as_ref();
    let text = serde_json::to_string_pretty(&MdpFile::from_model(mdp, policy))?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
