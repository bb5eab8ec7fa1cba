use crate::error::{domain, invalid, Result};
use crate::scalar::Real;

/// Uniform discretization `{0, 1/N, ..., 1}` of the prediction space.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid<R: Real = f64> {
    n: usize,
    points: Vec<R>,
}

impl<R: Real> Grid<R> {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(invalid("grid size N must be at least 1"));
        }
        let nr = R::from_usize_lossy(n);
        let points = (0..=n)
            .map(|i| {
                if i == n {
                    R::one()
                } else {
                    R::from_usize_lossy(i) / nr
                }
            })
            .collect();
        Ok(Self { n, points })
    }

    /// The resolution parameter `N`; the grid has `N + 1` points.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.n + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn points(&self) -> &[R] {
        &self.points
    }

    pub fn point(&self, i: usize) -> R {
        self.points[i]
    }

    pub fn spacing(&self) -> R {
        R::one() / R::from_usize_lossy(self.n)
    }

    /// Index `i` with `z_i <= p < z_{i+1}`, and `N` for `p = 1`.
    pub fn lower_index(&self, p: R) -> Result<usize> {
        if !(p >= R::zero() && p <= R::one()) {
            return Err(domain(format!("prediction {p} outside [0, 1]")));
        }
        let raw = (p * R::from_usize_lossy(self.n)).floor().to_usize().unwrap_or(0);
        let mut i = raw.min(self.n);
        // floor(N * p) can land one cell off when N * p is within an ulp of an integer.
        while i > 0 && self.points[i] > p {
            i -= 1;
        }
        while i < self.n && self.points[i + 1] <= p {
            i += 1;
        }
        Ok(i)
    }
}

pub fn make_grid<R: Real>(n: usize) -> Result<Grid<R>> {
    Grid::new(n)
}
