use crate::error::{domain, invalid, Error, Result};
use crate::scalar::{dot, norm2, Real};

use super::{Matrix, SymmetricEigen};

/// Maintained inverse `A^{-1}` of a symmetric positive-definite curvature matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct CurvatureMatrix<R: Real = f64> {
    inverse: Matrix<R>,
}

impl<R: Real> CurvatureMatrix<R> {
    /// `A = omega I`, stored as `(1 / omega) I`.
    pub fn scaled_identity(d: usize, omega: R) -> Self {
        Self {
            inverse: Matrix::scaled_identity(d, R::one() / omega),
        }
    }

    /// Wraps an explicit inverse after checking symmetry and positive-definiteness.
    pub fn from_inverse(inverse: Matrix<R>) -> Result<Self> {
        if inverse.rows() != inverse.cols() {
            return Err(invalid("curvature inverse must be square"));
        }
        if inverse.max_asymmetry() > R::tol(1e-9) * inverse.frobenius().max(R::one()) {
            return Err(invalid("curvature inverse is not symmetric"));
        }
        if inverse.cholesky().is_none() {
            return Err(invalid("curvature inverse is not positive-definite"));
        }
        Ok(Self { inverse })
    }

    /// Builds from the curvature matrix `A` itself.
    pub fn from_matrix(a: &Matrix<R>) -> Result<Self> {
        let inverse = a
            .spd_inverse()
            .ok_or_else(|| invalid("curvature matrix is not positive-definite"))?;
        Ok(Self { inverse })
    }

    pub fn dim(&self) -> usize {
        self.inverse.rows()
    }

    pub fn inverse(&self) -> &Matrix<R> {
        &self.inverse
    }

    /// `A^{-1} g`
    pub fn apply_inverse(&self, g: &[R]) -> Vec<R> {
        self.inverse.mul_vec(g)
    }

    /// `A`, by one dense inversion of the stored inverse.
    pub fn matrix(&self) -> Result<Matrix<R>> {
        self.inverse.spd_inverse().ok_or(Error::NumericFailure {
            what: "curvature reconstruction",
            residual: f64::NAN,
        })
    }
}

/// Inverse of `A + g g^T` given `M = A^{-1}`: `M - (M g)(M g)^T / (1 + g^T M g)`.
pub fn sherman_morrison_update<R: Real>(m: &CurvatureMatrix<R>, g: &[R]) -> Result<CurvatureMatrix<R>> {
    if g.len() != m.dim() {
        return Err(invalid(format!(
            "update vector has dimension {}, curvature has {}",
            g.len(),
            m.dim()
        )));
    }
    if g.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericFailure {
            what: "sherman-morrison update",
            residual: f64::INFINITY,
        });
    }
    if g.iter().all(|&v| v == R::zero()) {
        return Ok(m.clone());
    }
    let mg = m.apply_inverse(g);
    let denom = R::one() + dot(g, &mg);
    let mut inverse = m.inverse.clone();
    inverse.add_outer(-R::one() / denom, &mg, &mg);
    inverse.symmetrize();
    if !inverse.is_finite() {
        return Err(Error::NumericFailure {
            what: "sherman-morrison update",
            residual: f64::INFINITY,
        });
    }
    Ok(CurvatureMatrix { inverse })
}

const BISECTION_MAX_ITERS: usize = 200;

/// Smallest `mu >= 0` (up to `tol` in norm) with
/// `|| sum_k num_k / (lambda_k + mu) v_k || <= radius`, for `lambda_k >= 0`.
/// The returned point always satisfies the norm bound.
pub(crate) fn ridge_multiplier<R: Real>(lambdas: &[R], nums: &[R], radius: R, tol: R) -> Result<R> {
    let norm_at = |mu: R| -> R {
        lambdas
            .iter()
            .zip(nums)
            .map(|(&l, &n)| {
                let den = l + mu;
                if n == R::zero() {
                    R::zero()
                } else {
                    let r = n / den;
                    r * r
                }
            })
            .sum::<R>()
            .sqrt()
    };
    let mut lo = R::zero();
    let mut hi = norm2(nums) / radius;
    if !(norm_at(hi) <= radius) {
        hi = hi * R::lit(2.0) + R::one();
    }
    for _ in 0..BISECTION_MAX_ITERS {
        let n_hi = norm_at(hi);
        if (radius - n_hi) <= tol {
            return Ok(hi);
        }
        let mid = (lo + hi) * R::lit(0.5);
        if mid <= lo || mid >= hi {
            break;
        }
        if norm_at(mid) > radius {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let gap = (radius - norm_at(hi)).abs();
    if gap <= tol {
        Ok(hi)
    } else {
        Err(Error::NumericFailure {
            what: "norm-ball bisection",
            residual: gap.as_f64(),
        })
    }
}

/// `argmin_{||u|| <= radius} (u - theta)^T A (u - theta)`.
///
/// Interior points are returned unchanged; otherwise `u = (A + mu I)^{-1} A theta`
/// with `mu` found by bisection so that `||u||` meets the radius within `1e-9`.
pub fn project_ball_a_norm<R: Real>(theta: &[R], a: &CurvatureMatrix<R>, radius: R) -> Result<Vec<R>> {
    if !(radius > R::zero()) {
        return Err(invalid("projection radius must be positive"));
    }
    if theta.len() != a.dim() {
        return Err(invalid("projection dimension mismatch"));
    }
    if norm2(theta) <= radius {
        return Ok(theta.to_vec());
    }
    // Eigenvectors of A^{-1} are those of A with reciprocal eigenvalues.
    let eig = SymmetricEigen::new(a.inverse())?;
    let lambdas: Vec<R> = eig.values.iter().map(|&m| R::one() / m).collect();
    if lambdas.iter().any(|l| !(l.is_finite() && *l > R::zero())) {
        return Err(Error::NumericFailure {
            what: "a-norm projection",
            residual: f64::NAN,
        });
    }
    let nums: Vec<R> = eig
        .vectors
        .iter()
        .zip(&lambdas)
        .map(|(v, &l)| l * dot(v, theta))
        .collect();
    let mu = ridge_multiplier(&lambdas, &nums, radius, R::tol(1e-9))?;
    Ok(combine(&eig.vectors, &lambdas, &nums, mu))
}

pub(crate) fn combine<R: Real>(vectors: &[Vec<R>], lambdas: &[R], nums: &[R], mu: R) -> Vec<R> {
    let d = vectors.first().map_or(0, |v| v.len());
    let mut u = vec![R::zero(); d];
    for ((v, &l), &n) in vectors.iter().zip(lambdas).zip(nums) {
        if n == R::zero() {
            continue;
        }
        let c = n / (l + mu);
        for (ui, &vi) in u.iter_mut().zip(v) {
            *ui += c * vi;
        }
    }
    u
}

/// Clamp to `[0, 1]`.
pub fn project_box<R: Real>(w: R) -> Result<R> {
    if w.is_nan() {
        return Err(domain("cannot project NaN onto [0, 1]"));
    }
    Ok(w.max(R::zero()).min(R::one()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sherman_morrison_examples() {
        let m = CurvatureMatrix::<f64>::scaled_identity(2, 1.0);
        let up = sherman_morrison_update(&m, &[1.0, 0.0]).unwrap();
        assert_eq!(up.inverse().to_rows(), vec![vec![0.5, 0.0], vec![0.0, 1.0]]);
        let same = sherman_morrison_update(&m, &[0.0, 0.0]).unwrap();
        assert_eq!(same, m);
        assert!(sherman_morrison_update(&m, &[f64::NAN, 0.0]).is_err());
    }

    #[test]
    fn projection_examples() {
        let id = CurvatureMatrix::<f64>::scaled_identity(2, 1.0);
        let u = project_ball_a_norm(&[5.0, 0.0], &id, 4.0).unwrap();
        assert!((u[0] - 4.0).abs() < 1e-9 && u[1].abs() < 1e-12);
        assert_eq!(project_ball_a_norm(&[1.0, 1.0], &id, 4.0).unwrap(), vec![1.0, 1.0]);
        assert!(project_ball_a_norm(&[1.0, 1.0], &id, 0.0).is_err());
    }

    #[test]
    fn box_projection() {
        assert_eq!(project_box(1.3).unwrap(), 1.0);
        assert_eq!(project_box(-0.2).unwrap(), 0.0);
        assert_eq!(project_box(0.4).unwrap(), 0.4);
        assert!(project_box(f64::NAN).is_err());
    }

    #[test]
    fn reconstruct_matrix() {
        let a = Matrix::from_rows(&[vec![4.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let c = CurvatureMatrix::from_matrix(&a).unwrap();
        assert!(c.matrix().unwrap().sub(&a).frobenius() < 1e-12);
        assert!(CurvatureMatrix::from_inverse(Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap()).is_err());
    }
}
