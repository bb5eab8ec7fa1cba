use crate::error::{Error, Result};
use crate::scalar::Real;

/// Small dense row-major matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix<R: Real = f64> {
    rows: usize,
    cols: usize,
    data: Vec<R>,
}

impl<R: Real> Matrix<R> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![R::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::scaled_identity(n, R::one())
    }

    pub fn scaled_identity(n: usize, s: R) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = s;
        }
        m
    }

    pub fn diag(d: &[R]) -> Self {
        let mut m = Self::zeros(d.len(), d.len());
        for (i, &v) in d.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<R>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::InvalidParameter("ragged matrix rows".into()));
        }
        Ok(Self {
            rows: r,
            cols: c,
            data: rows.iter().flatten().copied().collect(),
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[R] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<R>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn mul_vec(&self, v: &[R]) -> Vec<R> {
        debug_assert_eq!(v.len(), self.cols);
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(&a, &b)| a * b).sum())
            .collect()
    }

    pub fn mul(&self, other: &Matrix<R>) -> Matrix<R> {
        debug_assert_eq!(self.cols, other.rows);
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == R::zero() {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn transpose(&self) -> Matrix<R> {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    /// `self += s * u v^T`
    pub fn add_outer(&mut self, s: R, u: &[R], v: &[R]) {
        for i in 0..self.rows {
            for j in 0..self.cols {
                self[(i, j)] += s * u[i] * v[j];
            }
        }
    }

    pub fn max_asymmetry(&self) -> R {
        let mut worst = R::zero();
        for i in 0..self.rows {
            for j in 0..i {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }

    pub fn symmetrize(&mut self) {
        for i in 0..self.rows {
            for j in 0..i {
                let avg = (self[(i, j)] + self[(j, i)]) * R::lit(0.5);
                self[(i, j)] = avg;
                self[(j, i)] = avg;
            }
        }
    }

    pub fn frobenius(&self) -> R {
        self.data.iter().map(|&v| v * v).sum::<R>().sqrt()
    }

    pub fn sub(&self, other: &Matrix<R>) -> Matrix<R> {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| a - b).collect(),
        }
    }

    /// Lower-triangular Cholesky factor; `None` unless symmetric positive-definite.
    pub fn cholesky(&self) -> Option<Matrix<R>> {
        let n = self.rows;
        if n != self.cols {
            return None;
        }
        let mut l = Matrix::zeros(n, n);
        for j in 0..n {
            let mut diag = self[(j, j)];
            for k in 0..j {
                diag -= l[(j, k)] * l[(j, k)];
            }
            if !(diag > R::zero()) {
                return None;
            }
            let ljj = diag.sqrt();
            l[(j, j)] = ljj;
            for i in j + 1..n {
                let mut s = self[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / ljj;
            }
        }
        Some(l)
    }

    /// Inverse of a symmetric positive-definite matrix via Cholesky.
    pub fn spd_inverse(&self) -> Option<Matrix<R>> {
        let l = self.cholesky()?;
        let n = self.rows;
        let mut inv = Matrix::zeros(n, n);
        let mut e = vec![R::zero(); n];
        for c in 0..n {
            e.iter_mut().for_each(|v| *v = R::zero());
            e[c] = R::one();
            let col = cholesky_solve(&l, &e);
            for r in 0..n {
                inv[(r, c)] = col[r];
            }
        }
        inv.symmetrize();
        Some(inv)
    }

    /// Solves `self x = b` by Gaussian elimination with partial pivoting.
    pub fn solve(&self, b: &[R]) -> Option<Vec<R>> {
        let n = self.rows;
        if n != self.cols || b.len() != n {
            return None;
        }
        let mut a = self.clone();
        let mut x = b.to_vec();
        for k in 0..n {
            let (piv, piv_abs) = (k..n)
                .map(|i| (i, a[(i, k)].abs()))
                .fold((k, R::zero()), |best, cur| if cur.1 > best.1 { cur } else { best });
            if !(piv_abs > R::zero()) {
                return None;
            }
            if piv != k {
                for j in 0..n {
                    let tmp = a[(k, j)];
                    a[(k, j)] = a[(piv, j)];
                    a[(piv, j)] = tmp;
                }
                x.swap(k, piv);
            }
            let akk = a[(k, k)];
            for i in k + 1..n {
                let f = a[(i, k)] / akk;
                if f == R::zero() {
                    continue;
                }
                for j in k..n {
                    let v = a[(k, j)];
                    a[(i, j)] -= f * v;
                }
                let xk = x[k];
                x[i] -= f * xk;
            }
        }
        for k in (0..n).rev() {
            let mut s = x[k];
            for j in k + 1..n {
                s -= a[(k, j)] * x[j];
            }
            x[k] = s / a[(k, k)];
        }
        Some(x)
    }
}

fn cholesky_solve<R: Real>(l: &Matrix<R>, b: &[R]) -> Vec<R> {
    let n = l.rows;
    let mut y = vec![R::zero(); n];
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[(i, k)] * y[k];
        }
        y[i] = s / l[(i, i)];
    }
    let mut x = vec![R::zero(); n];
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in i + 1..n {
            s -= l[(k, i)] * x[k];
        }
        x[i] = s / l[(i, i)];
    }
    x
}

impl<R: Real> std::ops::Index<(usize, usize)> for Matrix<R> {
    type Output = R;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &R {
        &self.data[i * self.cols + j]
    }
}

impl<R: Real> std::ops::IndexMut<(usize, usize)> for Matrix<R> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut R {
        &mut self.data[i * self.cols + j]
    }
}

/// Eigen-decomposition of a symmetric matrix.
#[derive(Clone, Debug)]
pub struct SymmetricEigen<R: Real = f64> {
    /// Ascending eigenvalues.
    pub values: Vec<R>,
    /// `vectors[k]` is the unit eigenvector of `values[k]`.
    pub vectors: Vec<Vec<R>>,
}

impl<R: Real> SymmetricEigen<R> {
    /// Cyclic Jacobi rotations until off-diagonal mass is negligible.
    pub fn new(m: &Matrix<R>) -> Result<Self> {
        let n = m.rows();
        if n != m.cols() {
            return Err(Error::InvalidParameter("eigen-decomposition needs a square matrix".into()));
        }
        let mut a = m.clone();
        a.symmetrize();
        let mut v = Matrix::identity(n);
        let scale = a.frobenius().max(R::min_positive_value());
        let mut converged = n < 2;
        for _sweep in 0..100 {
            let off: R = (0..n)
                .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
                .map(|(i, j)| a[(i, j)] * a[(i, j)])
                .sum::<R>()
                .sqrt();
            if off <= R::epsilon() * scale * R::lit(1e-2) {
                converged = true;
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    let apq = a[(p, q)];
                    if apq == R::zero() {
                        continue;
                    }
                    let theta = (a[(q, q)] - a[(p, p)]) / (R::lit(2.0) * apq);
                    let t = theta.signum() / (theta.abs() + (theta * theta + R::one()).sqrt());
                    let t = if theta == R::zero() { R::one() } else { t };
                    let c = R::one() / (t * t + R::one()).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let akp = a[(k, p)];
                        let akq = a[(k, q)];
                        a[(k, p)] = c * akp - s * akq;
                        a[(k, q)] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let apk = a[(p, k)];
                        let aqk = a[(q, k)];
                        a[(p, k)] = c * apk - s * aqk;
                        a[(q, k)] = s * apk + c * aqk;
                    }
                    for k in 0..n {
                        let vkp = v[(k, p)];
                        let vkq = v[(k, q)];
                        v[(k, p)] = c * vkp - s * vkq;
                        v[(k, q)] = s * vkp + c * vkq;
                    }
                }
            }
        }
        if !converged {
            let off: R = (0..n)
                .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
                .map(|(i, j)| a[(i, j)].abs())
                .fold(R::zero(), R::max);
            if off > R::tol(1e-10) * scale {
                return Err(Error::NumericFailure {
                    what: "jacobi eigen-decomposition",
                    residual: off.as_f64(),
                });
            }
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| a[(i, i)].partial_cmp(&a[(j, j)]).unwrap_or(std::cmp::Ordering::Equal));
        Ok(Self {
            values: order.iter().map(|&i| a[(i, i)]).collect(),
            vectors: order
                .iter()
                .map(|&i| (0..n).map(|k| v[(k, i)]).collect())
                .collect(),
        })
    }

    pub fn max_value(&self) -> R {
        self.values.last().copied().unwrap_or(R::zero())
    }
}
