//! Finite Markov chains: stationary distribution, total variation, mixing
//! time, and the exploration constants `(sigma, tau)` derived from them.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::matrix::Matrix;

/// Row-sum tolerance for stochastic matrices.
pub const ROW_SUM_TOL: f64 = 1e-12;
/// Default power-iteration tolerance on `||mu P - mu||_1`.
pub const STATIONARY_TOL: f64 = 1e-13;
/// Iteration cap for power iteration and for the mixing-time search.
pub const DEFAULT_ITER_CAP: u64 = 1_000_000;
/// Total-variation threshold defining the mixing time.
pub const MIXING_THRESHOLD: f64 = 0.25;

/// Absolute slack used when taking `ceil(log2(2 / mu_min))`; `mu_min` comes
/// out of power iteration with errors around 1e-14.
const CEIL_LOG2_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkovChain {
    transition: Matrix,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    labels: Option<Vec<String>>,
}

impl MarkovChain {
    pub fn new(transition: Matrix) -> Result<Self> {
        if !transition.is_square() || transition.rows() == 0 {
            return Err(Error::input("transition matrix must be square and non-empty"));
        }
        for i in 0..transition.rows() {
            let row = transition.row(i);
            if let Some(j) = row.iter().position(|p| !(0.0..=1.0).contains(p)) {
                return Err(Error::input(format!(
                    "transition entry ({i}, {j}) = {} is outside [0, 1]",
                    row[j]
                )));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::input(format!("transition row {i} sums to {sum}")));
            }
        }
        Ok(MarkovChain {
            transition,
            labels: None,
        })
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        MarkovChain::new(Matrix::from_rows(rows)?)
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        check_dim("chain labels", self.len(), labels.len())?;
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn len(&self) -> usize {
        self.transition.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn transition(&self) -> &Matrix {
        &self.transition
    }

    /// Strong connectivity of the transition graph. Optional diagnostic;
    /// the analysis routines detect non-ergodicity by non-convergence.
    pub fn is_irreducible(&self) -> bool {
        let n = self.len();
        let reach = |forward: bool| {
            let mut seen = vec![false; n];
            let mut stack = vec![0usize];
            seen[0] = true;
            while let Some(i) = stack.pop() {
                for (j, flag) in seen.iter_mut().enumerate() {
                    let p = if forward {
                        self.transition.get(i, j)
                    } else {
                        self.transition.get(j, i)
                    };
                    if p > 0.0 && !*flag {
                        *flag = true;
                        stack.push(j);
                    }
                }
            }
            seen.into_iter().all(|s| s)
        };
        reach(true) && reach(false)
    }
}

fn l1_distance(p: &[f64], q: &[f64]) -> f64 {
    p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum()
}

/// Stationary distribution by power iteration from a point mass on state 0.
///
/// Stops once `||mu_{k+1} - mu_k||_1 <= tol`; since a stochastic matrix is
/// non-expansive in L1, the returned vector has fixed-point residual at most
/// `tol`. Periodic chains oscillate and hit the iteration cap.
pub fn stationary_distribution(chain: &MarkovChain, tol: f64) -> Result<Vec<f64>> {
    stationary_distribution_with_cap(chain, tol, DEFAULT_ITER_CAP)
}

pub fn stationary_distribution_with_cap(
    chain: &MarkovChain,
    tol: f64,
    cap: u64,
) -> Result<Vec<f64>> {
    if !(tol > 0.0) {
        return Err(Error::input(format!("tolerance must be positive, got {tol}")));
    }
    let n = chain.len();
    let mut mu = vec![0.0; n];
    mu[0] = 1.0;
    for _ in 0..cap {
        let mut next = chain.transition.vec_mul(&mu)?;
        let total: f64 = next.iter().sum();
        next.iter_mut().for_each(|p| *p /= total);
        let delta = l1_distance(&next, &mu);
        mu = next;
        if delta <= tol {
            return Ok(mu);
        }
    }
    Err(Error::Ergodicity(format!(
        "power iteration did not reach tolerance {tol} within {cap} iterations"
    )))
}

pub fn tv_distance(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::input(format!(
            "distributions have different lengths {} and {}",
            p.len(),
            q.len()
        )));
    }
    for (name, d) in [("p", p), ("q", q)] {
        if let Some(i) = d.iter().position(|x| !(x.is_finite() && *x >= -1e-12)) {
            return Err(Error::input(format!("{name}[{i}] = {} is not a probability", d[i])));
        }
        let sum: f64 = d.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::input(format!("{name} sums to {sum}, not 1")));
        }
    }
    Ok(0.5 * l1_distance(p, q))
}

/// Largest total-variation distance to `mu` over all rows of `dist`.
fn worst_tv(dist: &Matrix, mu: &[f64]) -> f64 {
    (0..dist.rows())
        .map(|s| 0.5 * l1_distance(dist.row(s), mu))
        .fold(0.0, f64::max)
}

pub fn mixing_time(chain: &MarkovChain, mu: &[f64]) -> Result<u64> {
    mixing_time_with(chain, mu, MIXING_THRESHOLD, DEFAULT_ITER_CAP)
}

/// Smallest `t >= 1` with `max_s TV(P^t(s, .), mu) <= threshold`.
pub fn mixing_time_with(chain: &MarkovChain, mu: &[f64], threshold: f64, cap: u64) -> Result<u64> {
    check_dim("mixing time (stationary vector)", chain.len(), mu.len())?;
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::input(format!("TV threshold must be in (0, 1), got {threshold}")));
    }
    let p = chain.transition();
    let mut dist = p.clone();
    let mut t = 1;
    loop {
        if worst_tv(&dist, mu) <= threshold {
            return Ok(t);
        }
        if t >= cap {
            return Err(Error::Ergodicity(format!(
                "total variation stayed above {threshold} for {cap} steps"
            )));
        }
        dist = dist.matmul(p)?;
        t += 1;
    }
}

/// Worst-case TV distance to `mu` after exactly `t` steps.
pub fn tv_after(chain: &MarkovChain, mu: &[f64], t: u64) -> Result<f64> {
    check_dim("tv_after (stationary vector)", chain.len(), mu.len())?;
    Ok(worst_tv(&chain.transition().pow(t)?, mu))
}

/// Exploration constants of a Markov visitation process.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExplorationParams {
    pub sigma: f64,
    pub tau: u64,
    pub mu_min: f64,
    pub t_mix: u64,
}

/// `ceil(log2(x))` with a small slack so that values a few ulps above a power
/// of two do not round up.
pub fn ceil_log2(x: f64) -> u64 {
    (x.log2() - CEIL_LOG2_SLACK).ceil().max(0.0) as u64
}

impl ExplorationParams {
    /// `sigma = mu_min / 2`, `tau = ceil(log2(2 / mu_min)) * t_mix`.
    pub fn from_parts(mu_min: f64, t_mix: u64) -> Result<Self> {
        if !(mu_min > 0.0 && mu_min <= 1.0) {
            return Err(Error::Ergodicity(format!(
                "minimum stationary mass must be in (0, 1], got {mu_min}"
            )));
        }
        if t_mix == 0 {
            return Err(Error::input("mixing time must be positive"));
        }
        Ok(ExplorationParams {
            sigma: mu_min / 2.0,
            tau: ceil_log2(2.0 / mu_min) * t_mix,
            mu_min,
            t_mix,
        })
    }
}

pub fn exploration_params(chain: &MarkovChain) -> Result<ExplorationParams> {
    let mu = stationary_distribution(chain, STATIONARY_TOL)?;
    exploration_params_from(chain, &mu)
}

pub fn exploration_params_from(chain: &MarkovChain, mu: &[f64]) -> Result<ExplorationParams> {
    let mu_min = mu.iter().copied().fold(f64::INFINITY, f64::min);
    let t_mix = mixing_time(chain, mu)?;
    ExplorationParams::from_parts(mu_min, t_mix)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExplorationCheck {
    pub holds: bool,
    /// Smallest entry of `P^tau`.
    pub min_entry: f64,
    /// `(start, target)` attaining `min_entry`, lowest indices first.
    pub witness: (usize, usize),
}

/// Checks `P(i_t = i | F_{t - tau}) >= sigma` for a Markov visitation
/// process, i.e. every entry of `P^tau` is at least `sigma`.
pub fn exploration_check(chain: &MarkovChain, sigma: f64, tau: u64) -> Result<ExplorationCheck> {
    if !(sigma > 0.0 && sigma < 1.0) {
        return Err(Error::input(format!("sigma must be in (0, 1), got {sigma}")));
    }
    if tau == 0 {
        return Err(Error::input("tau must be a positive integer"));
    }
    let pt = chain.transition().pow(tau)?;
    let mut min_entry = f64::INFINITY;
    let mut witness = (0, 0);
    for s in 0..pt.rows() {
        for (j, &p) in pt.row(s).iter().enumerate() {
            if p < min_entry {
                min_entry = p;
                witness = (s, j);
            }
        }
    }
    Ok(ExplorationCheck {
        holds: min_entry >= sigma,
        min_entry,
        witness,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_state(p: f64, q: f64) -> MarkovChain {
        MarkovChain::from_rows(vec![vec![1.0 - p, p], vec![q, 1.0 - q]]).unwrap()
    }

    #[test]
    fn rejects_non_stochastic() {
        assert!(MarkovChain::from_rows(vec![vec![0.5, 0.6], vec![0.5, 0.5]]).is_err());
        assert!(MarkovChain::from_rows(vec![vec![1.5, -0.5], vec![0.5, 0.5]]).is_err());
        assert!(MarkovChain::from_rows(vec![vec![1.0, 0.0]]).is_err());
    }

    #[test]
    fn stationary_examples() {
        let mu = stationary_distribution(&two_state(0.5, 0.5), 1e-13).unwrap();
        assert!((mu[0] - 0.5).abs() < 1e-12 && (mu[1] - 0.5).abs() < 1e-12);
        let mu = stationary_distribution(&two_state(0.2, 0.3), 1e-13).unwrap();
        assert!((mu[0] - 0.6).abs() < 1e-12, "{mu:?}");
        assert!((mu[1] - 0.4).abs() < 1e-12, "{mu:?}");
    }

    #[test]
    fn periodic_chain_fails_to_converge() {
        let cycle = two_state(1.0, 1.0);
        let err = stationary_distribution_with_cap(&cycle, 1e-13, 1000).unwrap_err();
        assert!(matches!(err, Error::Ergodicity(_)));
        let err = mixing_time_with(&cycle, &[0.5, 0.5], 0.25, 1000).unwrap_err();
        assert!(matches!(err, Error::Ergodicity(_)));
    }

    #[test]
    fn tv_examples() {
        assert_eq!(tv_distance(&[0.3, 0.7], &[0.3, 0.7]).unwrap(), 0.0);
        assert_eq!(tv_distance(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 1.0);
        assert!((tv_distance(&[0.5, 0.5], &[0.6, 0.4]).unwrap() - 0.1).abs() < 1e-15);
        assert!(tv_distance(&[1.0], &[0.5, 0.5]).is_err());
        assert!(tv_distance(&[0.5, 0.6], &[0.5, 0.5]).is_err());
    }

    #[test]
    fn mixing_examples() {
        let iid = MarkovChain::from_rows(vec![vec![0.3, 0.7], vec![0.3, 0.7]]).unwrap();
        assert_eq!(mixing_time(&iid, &[0.3, 0.7]).unwrap(), 1);
        // TV from either state is 0.5 * 0.8^t: 0.256 at t = 3, 0.2048 at t = 4.
        assert_eq!(mixing_time(&two_state(0.1, 0.1), &[0.5, 0.5]).unwrap(), 4);
    }

    #[test]
    fn exploration_param_arithmetic() {
        let p = ExplorationParams::from_parts(0.5, 1).unwrap();
        assert_eq!((p.sigma, p.tau), (0.25, 2));
        let p = ExplorationParams::from_parts(0.1, 5).unwrap();
        assert_eq!((p.sigma, p.tau), (0.05, 25));
        let p = exploration_params(&two_state(0.1, 0.1)).unwrap();
        assert_eq!(p.t_mix, 4);
        assert_eq!(p.tau, 8);
        assert!((p.sigma - 0.25).abs() < 1e-12);
        assert!(ExplorationParams::from_parts(0.0, 3).is_err());
    }

    #[test]
    fn ceil_log2_is_robust_to_rounding() {
        assert_eq!(ceil_log2(4.0), 2);
        assert_eq!(ceil_log2(4.0 * (1.0 + 1e-14)), 2);
        assert_eq!(ceil_log2(4.0 * (1.0 + 1e-6)), 3);
        assert_eq!(ceil_log2(20.0), 5);
        assert_eq!(ceil_log2(2.0), 1);
    }

    #[test]
    fn exploration_check_examples() {
        let c = exploration_check(&two_state(0.5, 0.5), 0.25, 1).unwrap();
        assert!(c.holds);
        assert_eq!(c.min_entry, 0.5);
        let c = exploration_check(&two_state(1.0, 1.0), 0.1, 1).unwrap();
        assert!(!c.holds);
        assert_eq!(c.min_entry, 0.0);
        assert_eq!(c.witness, (0, 0));
        assert!(exploration_check(&two_state(0.5, 0.5), 0.0, 1).is_err());
        assert!(exploration_check(&two_state(0.5, 0.5), 0.2, 0).is_err());
    }

    #[test]
    fn irreducibility_diagnostic() {
        assert!(two_state(0.1, 0.2).is_irreducible());
        let absorbing = MarkovChain::from_rows(vec![vec![1.0, 0.0], vec![0.5, 0.5]]).unwrap();
        assert!(!absorbing.is_irreducible());
    }
}
