use serde::{Deserialize, Serialize};

use super::trace::ErrorTrace;
use crate::error::{Error, Result};

/// Least-squares fit `log(error) = intercept + slope * log(t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual in log space.
    pub residual: f64,
    pub points: usize,
    pub t_min: u64,
    pub t_max: u64,
}

/// `[T / 100, T]` with `T` the largest checkpoint.
pub fn default_window(trace: &ErrorTrace) -> Option<(u64, u64)> {
    let t_max = trace.rows.iter().map(|r| r.t).max()?;
    Some(((t_max / 100).max(1), t_max))
}

/// Fits the median error across replications against `t` on a log-log
/// scale over `t_min <= t <= t_max` (default window when either is absent).
pub fn fit_rate(trace: &ErrorTrace, t_min: Option<u64>, t_max: Option<u64>) -> Result<RateFit> {
    let (dmin, dmax) = default_window(trace).ok_or_else(|| Error::input("trace is empty"))?;
    let (t_min, t_max) = (t_min.unwrap_or(dmin), t_max.unwrap_or(dmax));
    let points: Vec<(u64, f64)> = trace
        .median_by_checkpoint()
        .into_iter()
        .filter(|&(t, _)| t >= t_min && t <= t_max)
        .collect();
    if points.len() < 3 {
        return Err(Error::input(format!(
            "need at least 3 checkpoints in [{t_min}, {t_max}], found {}",
            points.len()
        )));
    }
    if let Some(&(t, _)) = points.iter().find(|(_, e)| *e <= 0.0) {
        return Err(Error::DegenerateFit(format!(
            "median error is exactly zero at t = {t}; the iterates converged exactly"
        )));
    }
    let xs: Vec<f64> = points.iter().map(|&(t, _)| (t as f64).ln()).collect();
    let ys: Vec<f64> = points.iter().map(|&(_, e)| e.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    Ok(RateFit {
        slope,
        intercept,
        residual: (sse / n).sqrt(),
        points: points.len(),
        t_min,
        t_max,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::trace::TraceRow;

    fn power_law(c: f64, p: f64, reps: u64) -> ErrorTrace {
        let mut rows = Vec::new();
        for r in 0..reps {
            for e in 0..=12 {
                let t = 1u64 << e;
                rows.push(TraceRow { replication: r, t, error: c * (t as f64).powf(p), alpha: 0.0 });
            }
        }
        ErrorTrace { rows }
    }

    #[test]
    fn exact_power_laws() {
        let f = fit_rate(&power_law(3.0, -0.5, 1), Some(1), None).unwrap();
        assert!((f.slope + 0.5).abs() < 1e-6 && f.residual < 1e-9);
        let f = fit_rate(&power_law(3.0, -1.0, 3), None, None).unwrap();
        assert!((f.slope + 1.0).abs() < 1e-6);
        assert!((f.intercept - 3f64.ln()).abs() < 1e-9);
        for &(c, p, lo, hi) in &[(1e-4, -0.3, 4, 64), (250.0, -2.0, 16, 4096), (1.0, 0.7, 1, 8)] {
            let f = fit_rate(&power_law(c, p, 2), Some(lo), Some(hi)).unwrap();
            assert!((f.slope - p).abs() < 1e-6);
        }
    }

    #[test]
    fn too_few_points_or_zero_error() {
        assert!(matches!(fit_rate(&power_law(1.0, -1.0, 1), Some(1), Some(2)), Err(Error::Input(_))));
        let mut trace = power_law(1.0, -1.0, 1);
        trace.rows.last_mut().unwrap().error = 0.0;
        assert!(matches!(fit_rate(&trace, Some(1), None), Err(Error::DegenerateFit(_))));
        assert!(fit_rate(&ErrorTrace::default(), None, None).is_err());
    }
}
