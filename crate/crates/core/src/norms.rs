//! Weighted infinity norms, their induced matrix norm, and an empirical
//! contraction-modulus estimator.
//!
//! For a positive weight vector `v`, `||x||_v = max_i |x_i| / v_i`. The induced
//! matrix norm has the closed form `max_i sum_j (v_j / v_i) |a_ij|`, attained by
//! the sign vector `x_j = v_j sign(a_{i* j})` on a maximizing row `i*`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::matrix::Matrix;

/// Positive weights defining `||.||_v`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct WeightVector {
    v: Vec<f64>,
    v_min: f64,
}

impl WeightVector {
    pub fn new(v: Vec<f64>) -> Result<Self> {
        if v.is_empty() {
            return Err(Error::input("weight vector must be non-empty"));
        }
        if let Some((i, &bad)) = v
            .iter()
            .enumerate()
            .find(|(_, w)| !(w.is_finite() && **w > 0.0))
        {
            return Err(Error::input(format!(
                "weight {i} must be finite and strictly positive, got {bad}"
            )));
        }
        let v_min = v.iter().copied().fold(f64::INFINITY, f64::min);
        Ok(WeightVector { v, v_min })
    }

    /// All-ones weights; `||.||_v` is then the max norm.
    pub fn ones(n: usize) -> Self {
        WeightVector {
            v: vec![1.0; n],
            v_min: 1.0,
        }
    }

    pub fn len(&self) -> usize {
        self.v.len()
    }

    pub fn is_empty(&self) -> bool {
        self.v.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.v
    }

    pub fn min(&self) -> f64 {
        self.v_min
    }
}

impl TryFrom<Vec<f64>> for WeightVector {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        WeightVector::new(v)
    }
}

impl From<WeightVector> for Vec<f64> {
    fn from(w: WeightVector) -> Self {
        w.v
    }
}

pub fn weighted_norm(x: &[f64], w: &WeightVector) -> Result<f64> {
    check_dim("weighted norm", w.len(), x.len())?;
    Ok(weighted_norm_unchecked(x, w.as_slice()))
}

pub(crate) fn weighted_norm_unchecked(x: &[f64], v: &[f64]) -> f64 {
    x.iter()
        .zip(v)
        .map(|(xi, vi)| xi.abs() / vi)
        .fold(0.0, f64::max)
}

/// `||x - y||_v` without allocating the difference.
pub fn weighted_distance(x: &[f64], y: &[f64], w: &WeightVector) -> Result<f64> {
    check_dim("weighted distance", w.len(), x.len())?;
    check_dim("weighted distance", w.len(), y.len())?;
    Ok(x.iter()
        .zip(y)
        .zip(w.as_slice())
        .map(|((a, b), v)| (a - b).abs() / v)
        .fold(0.0, f64::max))
}

/// Plain max-abs norm.
pub fn max_norm(x: &[f64]) -> f64 {
    x.iter().map(|xi| xi.abs()).fold(0.0, f64::max)
}

fn check_square(a: &Matrix, w: &WeightVector) -> Result<()> {
    check_dim("induced norm (matrix rows)", w.len(), a.rows())?;
    check_dim("induced norm (matrix cols)", w.len(), a.cols())
}

fn weighted_row_sums<'a>(a: &'a Matrix, w: &'a WeightVector) -> impl Iterator<Item = f64> + 'a {
    let v = w.as_slice();
    (0..a.rows()).map(move |i| {
        a.row(i)
            .iter()
            .zip(v)
            .map(|(aij, vj)| vj * aij.abs())
            .sum::<f64>()
            / v[i]
    })
}

pub fn induced_matrix_norm(a: &Matrix, w: &WeightVector) -> Result<f64> {
    check_square(a, w)?;
    Ok(weighted_row_sums(a, w).fold(0.0, f64::max))
}

/// A unit vector in `||.||_v` whose image attains the induced norm.
///
/// The maximizing row is the lowest index among ties, and `sign(0) = +1`.
pub fn norm_achieving_vector(a: &Matrix, w: &WeightVector) -> Result<Vec<f64>> {
    check_square(a, w)?;
    let mut best_row = 0;
    let mut best = f64::NEG_INFINITY;
    for (i, s) in weighted_row_sums(a, w).enumerate() {
        if s > best {
            best = s;
            best_row = i;
        }
    }
    Ok(a.row(best_row)
        .iter()
        .zip(w.as_slice())
        .map(|(&aij, &vj)| if aij >= 0.0 { vj } else { -vj })
        .collect())
}

/// A map from `R^n` to itself.
pub trait Operator {
    fn dim(&self) -> usize;

    fn apply(&self, x: &[f64]) -> Result<Vec<f64>>;

    /// The `i`-th output coordinate. Implementors with cheap coordinate
    /// access should override this; asynchronous updates only need one entry.
    fn apply_coord(&self, x: &[f64], i: usize) -> Result<f64> {
        let fx = self.apply(x)?;
        fx.get(i)
            .copied()
            .ok_or_else(|| Error::Index(format!("coordinate {i} out of range {}", fx.len())))
    }
}

impl<T: Operator + ?Sized> Operator for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        (**self).apply(x)
    }

    fn apply_coord(&self, x: &[f64], i: usize) -> Result<f64> {
        (**self).apply_coord(x, i)
    }
}

/// Wraps a closure as an [`Operator`].
pub struct FnOperator<F> {
    dim: usize,
    f: F,
}

impl<F> FnOperator<F>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    pub fn new(dim: usize, f: F) -> Self {
        FnOperator { dim, f }
    }
}

impl<F> Operator for FnOperator<F>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim("operator input", self.dim, x.len())?;
        let out = (self.f)(x);
        check_dim("operator output", self.dim, out.len())?;
        Ok(out)
    }
}

/// `F(x) = A x + b`. Its contraction modulus in `||.||_v` is `||A||_v`.
#[derive(Debug, Clone)]
pub struct AffineOperator {
    a: Matrix,
    b: Vec<f64>,
}

impl AffineOperator {
    pub fn new(a: Matrix, b: Vec<f64>) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::input("affine operator needs a square matrix"));
        }
        check_dim("affine offset", a.rows(), b.len())?;
        Ok(AffineOperator { a, b })
    }

    pub fn matrix(&self) -> &Matrix {
        &self.a
    }

    pub fn offset(&self) -> &[f64] {
        &self.b
    }
}

impl Operator for AffineOperator {
    fn dim(&self) -> usize {
        self.b.len()
    }

    fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = self.a.mul_vec(x)?;
        for (o, b) in out.iter_mut().zip(&self.b) {
            *o += b;
        }
        Ok(out)
    }

    fn apply_coord(&self, x: &[f64], i: usize) -> Result<f64> {
        check_dim("operator input", self.dim(), x.len())?;
        if i >= self.dim() {
            return Err(Error::Index(format!("coordinate {i} out of range {}", self.dim())));
        }
        Ok(self.a.row(i).iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + self.b[i])
    }
}

fn sample_ball<R: Rng + ?Sized>(w: &WeightVector, radius: f64, rng: &mut R) -> Vec<f64> {
    w.as_slice()
        .iter()
        .map(|vi| vi * radius * rng.gen_range(-1.0..=1.0))
        .collect()
}

/// Largest observed ratio `||F(x) - F(y)||_v / ||x - y||_v` over `pairs`
/// random pairs from the `||.||_v` ball of the given radius.
///
/// This is a lower bound on the Lipschitz modulus of `op`.
pub fn estimate_contraction<O, R>(
    op: &O,
    w: &WeightVector,
    pairs: usize,
    radius: f64,
    rng: &mut R,
) -> Result<f64>
where
    O: Operator + ?Sized,
    R: Rng + ?Sized,
{
    if pairs == 0 {
        return Err(Error::input("pairs must be at least 1"));
    }
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::input(format!("radius must be positive, got {radius}")));
    }
    check_dim("contraction estimate", w.len(), op.dim())?;
    let mut best: f64 = 0.0;
    let mut drawn = 0;
    while drawn < pairs {
        let x = sample_ball(w, radius, rng);
        let y = sample_ball(w, radius, rng);
        let denom = weighted_distance(&x, &y, w)?;
        if denom == 0.0 {
            continue;
        }
        drawn += 1;
        let num = weighted_distance(&op.apply(&x)?, &op.apply(&y)?, w)?;
        best = best.max(num / denom);
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn w(v: &[f64]) -> WeightVector {
        WeightVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn weighted_norm_examples() {
        assert_eq!(weighted_norm(&[2.0, -3.0], &w(&[1.0, 1.0])).unwrap(), 3.0);
        assert_eq!(weighted_norm(&[2.0, -3.0], &w(&[2.0, 3.0])).unwrap(), 1.0);
        assert_eq!(weighted_norm(&[0.0; 3], &w(&[0.3, 2.0, 5.0])).unwrap(), 0.0);
    }

    #[test]
    fn weight_vector_rejects_nonpositive() {
        assert!(WeightVector::new(vec![1.0, 0.0]).is_err());
        assert!(WeightVector::new(vec![1.0, -2.0]).is_err());
        assert!(WeightVector::new(vec![]).is_err());
        assert!(WeightVector::new(vec![f64::NAN]).is_err());
        assert_eq!(w(&[3.0, 0.5, 2.0]).min(), 0.5);
    }

    #[test]
    fn length_mismatch_is_dimension_error() {
        let err = weighted_norm(&[1.0], &w(&[1.0, 1.0])).unwrap_err();
        assert!(matches!(err, Error::Dimension { .. }));
        let a = Matrix::identity(3);
        assert!(matches!(
            induced_matrix_norm(&a, &w(&[1.0, 1.0])),
            Err(Error::Dimension { .. })
        ));
        assert!(norm_achieving_vector(&a, &w(&[1.0, 1.0])).is_err());
    }

    #[test]
    fn induced_norm_examples() {
        let v = w(&[0.7, 3.0]);
        assert_eq!(induced_matrix_norm(&Matrix::identity(2), &v).unwrap(), 1.0);
        let d = Matrix::diagonal(&[0.5, -0.8]);
        assert!((induced_matrix_norm(&d, &v).unwrap() - 0.8).abs() < 1e-12);
        let a = Matrix::from_rows(vec![vec![1.0, 1.0], vec![0.0, 1.0]]).unwrap();
        assert_eq!(induced_matrix_norm(&a, &w(&[1.0, 2.0])).unwrap(), 3.0);
    }

    #[test]
    fn induced_norm_brute_force_cross_check() {
        // Random v-unit vectors never beat the row formula; the sign
        // construction attains it.
        let a = Matrix::from_rows(vec![vec![1.0, 1.0], vec![0.0, 1.0]]).unwrap();
        let v = w(&[1.0, 2.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut best: f64 = 0.0;
        for _ in 0..10_000 {
            let x = sample_ball(&v, 1.0, &mut rng);
            let nx = weighted_norm(&x, &v).unwrap();
            let ax = a.mul_vec(&x).unwrap();
            best = best.max(weighted_norm(&ax, &v).unwrap() / nx);
        }
        assert!(best <= 3.0 + 1e-12);
        assert!(best > 2.9);
    }

    #[test]
    fn norm_achieving_vector_examples() {
        let x = norm_achieving_vector(&Matrix::identity(2), &w(&[1.0, 1.0])).unwrap();
        assert_eq!(x, vec![1.0, 1.0]);

        let a = Matrix::from_rows(vec![vec![1.0, -1.0], vec![0.0, 1.0]]).unwrap();
        let v = w(&[1.0, 1.0]);
        let x = norm_achieving_vector(&a, &v).unwrap();
        assert_eq!(x, vec![1.0, -1.0]);
        assert_eq!(weighted_norm(&a.mul_vec(&x).unwrap(), &v).unwrap(), 2.0);

        let a = Matrix::from_rows(vec![vec![1.0, 1.0], vec![0.0, 1.0]]).unwrap();
        let v = w(&[1.0, 2.0]);
        let x = norm_achieving_vector(&a, &v).unwrap();
        assert_eq!(x, vec![1.0, 2.0]);
        assert_eq!(weighted_norm(&a.mul_vec(&x).unwrap(), &v).unwrap(), 3.0);
    }

    #[test]
    fn ties_pick_lowest_row_and_zero_sign_is_positive() {
        let a = Matrix::from_rows(vec![vec![0.0, -1.0], vec![-1.0, 0.0]]).unwrap();
        let x = norm_achieving_vector(&a, &w(&[1.0, 1.0])).unwrap();
        assert_eq!(x, vec![1.0, -1.0]);
    }

    #[test]
    fn contraction_examples() {
        let v = w(&[1.0, 2.0, 0.5]);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let half = FnOperator::new(3, |x: &[f64]| x.iter().map(|xi| 0.5 * xi).collect());
        let est = estimate_contraction(&half, &v, 200, 10.0, &mut rng).unwrap();
        assert!((est - 0.5).abs() < 1e-12, "{est}");

        let constant = FnOperator::new(3, |_: &[f64]| vec![1.0, -2.0, 3.0]);
        assert_eq!(
            estimate_contraction(&constant, &v, 50, 1.0, &mut rng).unwrap(),
            0.0
        );
    }

    #[test]
    fn contraction_rejects_bad_arguments() {
        let v = w(&[1.0]);
        let id = FnOperator::new(1, |x: &[f64]| x.to_vec());
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(estimate_contraction(&id, &v, 0, 1.0, &mut rng).is_err());
        assert!(estimate_contraction(&id, &v, 1, 0.0, &mut rng).is_err());
    }

    #[test]
    fn bad_operator_output_propagates() {
        let v = w(&[1.0, 1.0]);
        let broken = FnOperator::new(2, |_: &[f64]| vec![0.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(estimate_contraction(&broken, &v, 3, 1.0, &mut rng).is_err());
    }

    #[test]
    fn affine_operator_coordinate_matches_full() {
        let a = Matrix::from_rows(vec![vec![0.2, -0.1], vec![0.3, 0.4]]).unwrap();
        let op = AffineOperator::new(a, vec![1.0, -1.0]).unwrap();
        let x = [0.5, 2.0];
        let full = op.apply(&x).unwrap();
        for (i, fi) in full.iter().enumerate() {
            assert_eq!(op.apply_coord(&x, i).unwrap(), *fi);
        }
    }
}
